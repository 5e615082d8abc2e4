import { describe, expect, it } from 'vitest';

import {
	DEFAULT_STATE,
	stateFromQuery,
	stateToQuery,
	type MapViewState,
} from '../src/state.js';

describe('map view state URL round-trip', () => {
	const cases: MapViewState[] = [
		DEFAULT_STATE,
		{ typeFilter: 'IPV', layer: 'high_risk', district: null, village: null },
		{ typeFilter: 'elderly', layer: 'reports', district: 'D07', village: null },
		{ typeFilter: 'all', layer: 'high_risk', district: null, village: 'V123' },
		{
			typeFilter: 'child_adolescent',
			layer: 'high_risk',
			district: 'D01',
			village: 'V001',
		},
	];

	it.each(cases.map((c) => [stateToQuery(c) || '(default)', c]))(
		'%s reproduces the view',
		(_label, state) => {
			expect(stateFromQuery(stateToQuery(state as MapViewState))).toEqual(state);
		},
	);

	it('unknown values fall back to defaults', () => {
		const state = stateFromQuery('?type=bogus&layer=bogus');
		expect(state.typeFilter).toBe('all');
		expect(state.layer).toBe('reports');
	});

	it('default state produces a clean URL', () => {
		expect(stateToQuery(DEFAULT_STATE)).toBe('');
	});
});
