import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderBanner,
  renderChatError,
  renderCountyDetail,
  renderExchange,
  renderPersonaOptions,
  renderTrace,
} from "../src/render.js";
import type { ChatResponse, TraceEntry } from "../src/types.js";
import { parseFragment } from "./helpers.js";

const TRACE: TraceEntry[] = [
  {
    call_id: "call_0",
    name: "soc_prediction",
    arguments: { county: "Merced" },
    result: { county: "Merced", soc_2016_pct: 2.85, soc_2023_pct: 2.61 },
  },
  {
    call_id: "call_1",
    name: "support_arguments",
    arguments: { query: "wildfire soil carbon", topic: "Wildfire", k: 2 },
    result: {
      query: "wildfire soil carbon",
      topic: "Wildfire",
      results: [
        {
          doc_id: "salgado-2024",
          chunk_index: 0,
          title: "Fire recurrence effects",
          topic: "Wildfire",
          citation: "Salgado et al. 2024, Fire recurrence effects",
          score: 3.1,
          text: "Recurrent burning degrades soil organic matter.",
        },
      ],
    },
  },
  {
    call_id: "call_2",
    name: "tillage_scale",
    arguments: { county: "Sonoma" },
    error: { type: "NoTillageData", message: "no tillage data for Sonoma" },
  },
];

const RESPONSE: ChatResponse = {
  transcript_id: "session-7-1",
  session_id: "session-7",
  persona: "policymaker",
  answer: "Merced SOC fell from 2.85% to 2.61%.",
  tool_trace: TRACE,
  truncated: false,
};

describe("renderTrace", () => {
  it("renders one entry per tool_call/result pair, in order", () => {
    const dom = parseFragment(renderTrace(TRACE));
    const entries = [...dom.querySelectorAll("li.trace-entry")];

    expect(entries).toHaveLength(TRACE.length);
    entries.forEach((entry, i) => {
      expect(entry.getAttribute("data-call-id")).toBe(TRACE[i].call_id);
      expect(entry.getAttribute("data-tool")).toBe(TRACE[i].name);
      const args = entry.querySelector("pre.trace-args")!.textContent!;
      expect(JSON.parse(args)).toEqual(TRACE[i].arguments);
    });
  });

  it("shows results and errors verbatim", () => {
    const dom = parseFragment(renderTrace(TRACE));
    const outcomes = [...dom.querySelectorAll("pre.trace-outcome")];

    expect(outcomes[0].getAttribute("data-kind")).toBe("result");
    expect(JSON.parse(outcomes[0].textContent!)).toEqual(TRACE[0].result);
    expect(outcomes[2].getAttribute("data-kind")).toBe("error");
    expect(JSON.parse(outcomes[2].textContent!)).toEqual(TRACE[2].error);
  });

  it("says so when no tools were called", () => {
    expect(renderTrace([])).toContain("No tools were called");
  });

  it("escapes markup inside arguments", () => {
    const hostile: TraceEntry[] = [
      {
        call_id: "call_0",
        name: "support_arguments",
        arguments: { query: "<script>alert(1)</script>" },
        result: {},
      },
    ];
    const html = renderTrace(hostile);

    expect(html).not.toContain("<script>");
    const dom = parseFragment(html);
    expect(dom.querySelector("pre.trace-args")!.textContent).toContain(
      "<script>alert(1)</script>",
    );
  });
});

describe("renderExchange", () => {
  it("labels the answer with the persona role", () => {
    const dom = parseFragment(renderExchange("Why did SOC drop?", RESPONSE));

    expect(dom.querySelector(".role-label")!.textContent).toBe("policymaker");
    expect(dom.querySelector(".bubble-user")!.textContent).toBe(
      "Why did SOC drop?",
    );
    expect(dom.querySelector(".answer")!.textContent).toBe(RESPONSE.answer);
  });

  it("lists retrieved citations from support_arguments results", () => {
    const dom = parseFragment(renderExchange("q", RESPONSE));
    const sources = [...dom.querySelectorAll(".sources li")].map(
      (li) => li.textContent,
    );

    expect(sources).toEqual(["Salgado et al. 2024, Fire recurrence effects"]);
  });

  it("marks transcripts that hit the tool-call limit", () => {
    const truncated = { ...RESPONSE, truncated: true };
    const dom = parseFragment(renderExchange("q", truncated));

    expect(dom.querySelector(".badge-truncated")).not.toBeNull();
    expect(
      parseFragment(renderExchange("q", RESPONSE)).querySelector(
        ".badge-truncated",
      ),
    ).toBeNull();
  });

  it("omits the trace section when no tools ran", () => {
    const bare = { ...RESPONSE, tool_trace: [] };
    const dom = parseFragment(renderExchange("q", bare));

    expect(dom.querySelector(".trace-details")).toBeNull();
  });
});

describe("smaller renderers", () => {
  it("renders persona options with the active one selected", () => {
    const personas = [
      { role: "default", system_prompt: "p0" },
      { role: "agronomist", system_prompt: "p1" },
    ];
    const dom = parseFragment(
      `<select>${renderPersonaOptions(personas, "agronomist")}</select>`,
    );
    const options = [...dom.querySelectorAll("option")];

    expect(options.map((o) => o.getAttribute("value"))).toEqual([
      "default",
      "agronomist",
    ]);
    expect(options[1].hasAttribute("selected")).toBe(true);
    expect(options[0].hasAttribute("selected")).toBe(false);
  });

  it("renders county detail lists from the stored record", () => {
    const dom = parseFragment(
      renderCountyDetail({
        county: "Merced",
        soc_2016_pct: 2.85,
        soc_2023_pct: 2.61,
        drought_events: [],
        wildfires: [],
        crops: [
          {
            year: 2019,
            crops: [{ name: "Almonds", area_fraction: 0.31 }],
          },
        ],
        tillage_scale_2019: null,
        farms: [
          {
            farm_name: "Rolling Oaks",
            county: "Merced",
            practice: "cover cropping",
            year_implemented: 2021,
            funding_status: "funded",
          },
        ],
      }),
    );

    expect(dom.querySelector(".crop-list")!.textContent).toContain("Almonds");
    expect(dom.querySelector(".crop-list")!.textContent).toContain("0.31");
    expect(dom.querySelector(".farm-list")!.textContent).toContain(
      "Rolling Oaks · cover cropping (2021, funded)",
    );
  });

  it("renders the outage banner with a retry control", () => {
    const dom = parseFragment(renderBanner("service unreachable"));

    expect(dom.querySelector(".banner-message")!.textContent).toBe(
      "service unreachable",
    );
    expect(dom.querySelector("button.banner-retry")).not.toBeNull();
  });

  it("renders chat errors inline", () => {
    const dom = parseFragment(renderChatError("unknown persona 'farmer'"));

    expect(dom.querySelector(".bubble-error")!.textContent).toBe(
      "unknown persona 'farmer'",
    );
  });

  it("escapes all HTML-significant characters", () => {
    expect(escapeHtml(`<a href="x">&'</a>`)).toBe(
      "&lt;a href=&quot;x&quot;&gt;&amp;&#39;&lt;/a&gt;",
    );
  });
});
