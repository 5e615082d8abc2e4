// Dashboard bootstrap: wires the map, district drill-down, and intake form
// against the API, with the full view state kept in the URL.

import { ApiClient, CASE_TYPES, configuredBaseUrl, type CaseType, type MapCollection } from './api.js';
import { renderChoropleth, renderVillagePanel } from './choropleth.js';
import { showDistrict } from './district.js';
import { IntakeForm } from './intake.js';
import { pushState, readState, type MapViewState } from './state.js';

export async function bootstrap(root: Document = document): Promise<void> {
	const api = new ApiClient(configuredBaseUrl(root));
	const mapEl = root.getElementById('map');
	const detailEl = root.getElementById('detail');
	const intakeEl = root.getElementById('intake');
	const resultEl = root.getElementById('intake-result');
	const typeSelect = root.getElementById('type-filter') as HTMLSelectElement | null;
	const layerSelect = root.getElementById('layer') as HTMLSelectElement | null;
	if (!mapEl || !detailEl || !intakeEl || !resultEl || !typeSelect || !layerSelect) {
		throw new Error('dashboard container elements missing');
	}

	for (const caseType of ['all', ...CASE_TYPES]) {
		const option = root.createElement('option');
		option.value = caseType;
		option.textContent = caseType;
		typeSelect.appendChild(option);
	}

	let state: MapViewState = readState();
	typeSelect.value = state.typeFilter;
	layerSelect.value = state.layer;

	let collection: MapCollection | null = null;

	async function refreshMap(): Promise<void> {
		collection = await api.getMap(
			state.typeFilter === 'all' ? undefined : (state.typeFilter as CaseType),
		);
		renderChoropleth(mapEl!, collection, state.layer, {
			onVillageClick(feature) {
				state = { ...state, village: feature.properties.village_id, district: null };
				pushState(state);
				renderVillagePanel(detailEl!, feature);
			},
		});
		if (state.village && collection) {
			const selected = collection.features.find(
				(f) => f.properties.village_id === state.village,
			);
			if (selected) renderVillagePanel(detailEl!, selected);
		} else if (state.district) {
			await showDistrict(detailEl!, api, state.district);
		}
	}

	typeSelect.addEventListener('change', () => {
		state = { ...state, typeFilter: typeSelect.value as MapViewState['typeFilter'] };
		pushState(state);
		void refreshMap();
	});
	layerSelect.addEventListener('change', () => {
		state = { ...state, layer: layerSelect.value as MapViewState['layer'] };
		pushState(state);
		void refreshMap();
	});

	const intake = new IntakeForm(api, resultEl);
	intakeEl.appendChild(intake.form);

	await refreshMap();
}

if (typeof document !== 'undefined' && document.getElementById('map')) {
	void bootstrap();
}
