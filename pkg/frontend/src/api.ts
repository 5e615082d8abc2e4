// Typed client for the dvrisk HTTP API. The dashboard never computes
// statistics: everything it displays comes back from these calls.

export interface VillageProperties {
	village_id: string;
	district_id: string;
	total: number;
	count?: number;
	male?: number;
	female?: number;
	low_mid_income?: number;
	disability?: number;
	predicted_high_risk?: number;
	[key: string]: string | number | undefined;
}

export interface VillageFeature {
	type: 'Feature';
	properties: VillageProperties;
	geometry: { type: 'Polygon'; coordinates: number[][][] };
}

export interface MapCollection {
	type: 'FeatureCollection';
	features: VillageFeature[];
}

export interface DistrictOverview {
	district_id: string;
	n_villages: number;
	total: number;
	male: number;
	female: number;
	low_mid_income: number;
	disability: number;
	count_IPV: number;
	count_child_adolescent: number;
	count_elderly: number;
	count_intersibling_other: number;
	predicted_high_risk?: number;
	[key: string]: string | number | undefined;
}

export interface ScoreRequest {
	tipvda_score: number;
	dv_duration_months: number;
	maimed: string;
	occupation: string;
	education: string;
	district: string;
	victim_age?: number;
	victim_gender?: string;
}

export interface ScoreResponse {
	probability: number;
	label: 0 | 1;
	risk_level: 'low' | 'elevated' | 'high';
	model_version: string;
}

export const CASE_TYPES = [
	'IPV',
	'child_adolescent',
	'elderly',
	'intersibling_other',
] as const;
export type CaseType = (typeof CASE_TYPES)[number];

export class ApiError extends Error {
	constructor(
		readonly status: number,
		readonly fieldErrors: Record<string, string> | null,
		message: string,
	) {
		super(message);
	}
}

async function parseError(resp: Response): Promise<ApiError> {
	let fieldErrors: Record<string, string> | null = null;
	let message = `request failed (${resp.status})`;
	try {
		const doc = await resp.json();
		if (doc && typeof doc === 'object') {
			if (doc.errors) fieldErrors = doc.errors as Record<string, string>;
			if (doc.error) message = String(doc.error);
		}
	} catch {
		// non-JSON error body; keep the generic message
	}
	return new ApiError(resp.status, fieldErrors, message);
}

export class ApiClient {
	constructor(readonly baseUrl: string = '') {}

	async getMap(type?: CaseType): Promise<MapCollection> {
		const query = type ? `?type=${encodeURIComponent(type)}` : '';
		const resp = await fetch(`${this.baseUrl}/api/map${query}`);
		if (!resp.ok) throw await parseError(resp);
		return (await resp.json()) as MapCollection;
	}

	async getDistrict(id: string): Promise<DistrictOverview> {
		const resp = await fetch(`${this.baseUrl}/api/district/${encodeURIComponent(id)}`);
		if (!resp.ok) throw await parseError(resp);
		return (await resp.json()) as DistrictOverview;
	}

	async score(request: ScoreRequest): Promise<ScoreResponse> {
		const resp = await fetch(`${this.baseUrl}/api/score`, {
			method: 'POST',
			headers: { 'Content-Type': 'application/json' },
			body: JSON.stringify(request),
		});
		if (!resp.ok) throw await parseError(resp);
		return (await resp.json()) as ScoreResponse;
	}
}

/** Base URL comes from one setting: <meta name="api-base" content="..."> */
export function configuredBaseUrl(doc: Document = document): string {
	const meta = doc.querySelector('meta[name="api-base"]');
	return meta?.getAttribute('content') ?? '';
}
