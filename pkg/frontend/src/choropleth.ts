// SVG choropleth of village polygons, shaded by the active layer's count
// quantiles. Clicking a village opens its aggregate panel; every number in
// that panel is copied from the feature's properties.

import type { MapCollection, VillageFeature } from './api.js';
import { quantileScale } from './scales.js';
import type { Layer } from './state.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export function layerValue(feature: VillageFeature, layer: Layer): number {
	const props = feature.properties;
	if (layer === 'high_risk') return props.predicted_high_risk ?? 0;
	// the type-filtered payload exposes the selected category as `count`
	return props.count ?? props.total;
}

export interface ChoroplethHandlers {
	onVillageClick?(feature: VillageFeature): void;
	onHover?(feature: VillageFeature | null): void;
}

export function renderChoropleth(
	container: HTMLElement,
	collection: MapCollection,
	layer: Layer,
	handlers: ChoroplethHandlers = {},
): void {
	container.replaceChildren();
	if (!collection.features.length) {
		const empty = document.createElement('p');
		empty.className = 'empty-state';
		empty.textContent = 'No village data to display.';
		container.appendChild(empty);
		return;
	}

	let minX = Infinity;
	let minY = Infinity;
	let maxX = -Infinity;
	let maxY = -Infinity;
	for (const feature of collection.features) {
		for (const [x, y] of feature.geometry.coordinates[0]) {
			if (x < minX) minX = x;
			if (x > maxX) maxX = x;
			if (y < minY) minY = y;
			if (y > maxY) maxY = y;
		}
	}
	const width = 900;
	const height = Math.max(1, Math.round((width * (maxY - minY)) / (maxX - minX || 1)));
	const sx = width / (maxX - minX || 1);
	const sy = height / (maxY - minY || 1);

	const scale = quantileScale(collection.features.map((f) => layerValue(f, layer)));

	const svg = document.createElementNS(SVG_NS, 'svg');
	svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
	svg.setAttribute('class', 'choropleth');

	for (const feature of collection.features) {
		const points = feature.geometry.coordinates[0]
			.map(([x, y]) => `${((x - minX) * sx).toFixed(2)},${((maxY - y) * sy).toFixed(2)}`)
			.join(' ');
		const polygon = document.createElementNS(SVG_NS, 'polygon');
		polygon.setAttribute('points', points);
		polygon.setAttribute('fill', scale.colorFor(layerValue(feature, layer)));
		polygon.setAttribute('stroke', '#ffffff');
		polygon.setAttribute('stroke-width', '0.6');
		polygon.dataset.villageId = feature.properties.village_id;
		polygon.addEventListener('click', () => handlers.onVillageClick?.(feature));
		polygon.addEventListener('mouseenter', () => handlers.onHover?.(feature));
		polygon.addEventListener('mouseleave', () => handlers.onHover?.(null));
		svg.appendChild(polygon);
	}
	container.appendChild(svg);
	container.appendChild(renderLegend(scale.edges, layer));
}

function renderLegend(edges: number[], layer: Layer): HTMLElement {
	const legend = document.createElement('div');
	legend.className = 'legend';
	const title = document.createElement('span');
	title.textContent = layer === 'high_risk' ? 'predicted high-risk cases' : 'reported cases';
	legend.appendChild(title);
	const edgeList = document.createElement('span');
	edgeList.className = 'legend-edges';
	edgeList.textContent = edges.length
		? `quantile edges: ${edges.map((e) => formatCount(e)).join(' / ')}`
		: 'no cases';
	legend.appendChild(edgeList);
	return legend;
}

function formatCount(value: number): string {
	return Number.isInteger(value) ? String(value) : value.toFixed(1);
}

const PANEL_ROWS: [string, string][] = [
	['total', 'total cases'],
	['count_IPV', 'intimate partner'],
	['count_child_adolescent', 'child / adolescent'],
	['count_elderly', 'elderly'],
	['count_intersibling_other', 'intersibling / other'],
	['count', 'selected type'],
	['male', 'male victims'],
	['female', 'female victims'],
	['age_0-18', 'age 0-18'],
	['age_19-64', 'age 19-64'],
	['age_65+', 'age 65+'],
	['low_mid_income', 'low/mid income'],
	['disability', 'disability or mental illness'],
	['predicted_high_risk', 'predicted high-risk'],
];

/** Village detail panel: verbatim property values, no arithmetic. */
export function renderVillagePanel(container: HTMLElement, feature: VillageFeature): void {
	container.replaceChildren();
	const heading = document.createElement('h3');
	heading.textContent = `${feature.properties.village_id} (${feature.properties.district_id})`;
	container.appendChild(heading);
	const list = document.createElement('dl');
	list.className = 'village-stats';
	for (const [key, label] of PANEL_ROWS) {
		const value = feature.properties[key];
		if (value === undefined) continue;
		const dt = document.createElement('dt');
		dt.textContent = label;
		const dd = document.createElement('dd');
		dd.dataset.stat = key;
		dd.textContent = String(value);
		list.appendChild(dt);
		list.appendChild(dd);
	}
	container.appendChild(list);
}
