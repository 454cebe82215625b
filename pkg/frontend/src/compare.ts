/**
 * County comparison cards.
 *
 * Each card is assembled from direct /tools calls — the same dispatch the
 * agent uses — so the numbers on the card are exactly the tool results.
 * The full stored record (crops, enrolled farms) can be fetched separately
 * through GET /counties/{name} for the expandable detail section.
 */

import type { CopilotClient } from "./api.js";
import type {
  CountyRecord,
  DroughtConditionsResult,
  SocPredictionResult,
  TillageScaleResult,
  WildfireIncidentsResult,
} from "./types.js";

export interface CountyCard {
  county: string;
  soc: SocPredictionResult;
  tillage: TillageScaleResult;
  drought: DroughtConditionsResult;
  wildfires: WildfireIncidentsResult;
}

export async function loadCountyCard(
  client: CopilotClient,
  county: string,
): Promise<CountyCard> {
  const [soc, tillage, drought, wildfires] = await Promise.all([
    client.callTool<SocPredictionResult>("soc_prediction", { county }),
    client.callTool<TillageScaleResult>("tillage_scale", { county }),
    client.callTool<DroughtConditionsResult>("drought_conditions", { county }),
    client.callTool<WildfireIncidentsResult>("wildfire_incidents", { county }),
  ]);
  return { county: soc.county, soc, tillage, drought, wildfires };
}

export function loadCountyRecord(
  client: CopilotClient,
  county: string,
): Promise<CountyRecord> {
  return client.county(county);
}
