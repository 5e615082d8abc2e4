// Map view state, fully recoverable from the URL query string.

import { CASE_TYPES, type CaseType } from './api.js';

export type Layer = 'reports' | 'high_risk';

export interface MapViewState {
	typeFilter: CaseType | 'all';
	layer: Layer;
	district: string | null;
	village: string | null;
}

export const DEFAULT_STATE: MapViewState = {
	typeFilter: 'all',
	layer: 'reports',
	district: null,
	village: null,
};

export function stateToQuery(state: MapViewState): string {
	const params = new URLSearchParams();
	if (state.typeFilter !== 'all') params.set('type', state.typeFilter);
	if (state.layer !== 'reports') params.set('layer', state.layer);
	if (state.district) params.set('district', state.district);
	if (state.village) params.set('village', state.village);
	const text = params.toString();
	return text ? `?${text}` : '';
}

export function stateFromQuery(query: string): MapViewState {
	const params = new URLSearchParams(query.startsWith('?') ? query.slice(1) : query);
	const type = params.get('type');
	const layer = params.get('layer');
	return {
		typeFilter:
			type && (CASE_TYPES as readonly string[]).includes(type)
				? (type as CaseType)
				: 'all',
		layer: layer === 'high_risk' ? 'high_risk' : 'reports',
		district: params.get('district'),
		village: params.get('village'),
	};
}

export function pushState(state: MapViewState, win: Window = window): void {
	const url = win.location.pathname + stateToQuery(state);
	win.history.replaceState(null, '', url);
}

export function readState(win: Window = window): MapViewState {
	return stateFromQuery(win.location.search);
}
