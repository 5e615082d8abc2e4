import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { DistrictOverview, MapCollection, ScoreResponse } from '../src/api.js';

const here = dirname(fileURLToPath(import.meta.url));

function loadJson<T>(name: string): T {
	return JSON.parse(readFileSync(join(here, '..', 'fixtures', name), 'utf-8')) as T;
}

export const mapFixture = (): MapCollection => loadJson<MapCollection>('map.geojson');
export const districtFixture = (): DistrictOverview => loadJson<DistrictOverview>('district.json');
export const scoreFixture = (): ScoreResponse => loadJson<ScoreResponse>('score.json');

export function jsonResponse(doc: unknown, status = 200): Response {
	return new Response(JSON.stringify(doc), {
		status,
		headers: { 'Content-Type': 'application/json' },
	});
}
