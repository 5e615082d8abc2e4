// District overview: four case-type bars, a proportion heat bar, and the
// income/disability counts, mirroring the service's district payload.

import { ApiError, type ApiClient, type DistrictOverview } from './api.js';

const TYPE_LABELS: [keyof DistrictOverview & string, string, string][] = [
	['count_IPV', 'intimate partner', '#4878a8'],
	['count_child_adolescent', 'child / adolescent', '#6a9a58'],
	['count_elderly', 'elderly', '#b08030'],
	['count_intersibling_other', 'intersibling / other', '#8060a0'],
];

export function renderDistrictPanel(container: HTMLElement, overview: DistrictOverview): void {
	container.replaceChildren();
	const heading = document.createElement('h3');
	heading.textContent = `District ${overview.district_id}`;
	container.appendChild(heading);

	const counts = TYPE_LABELS.map(([key]) => Number(overview[key] ?? 0));
	const maxCount = Math.max(...counts, 1);
	const total = Number(overview.total ?? 0);

	const chart = document.createElement('div');
	chart.className = 'district-bars';
	TYPE_LABELS.forEach(([key, label, color], i) => {
		const row = document.createElement('div');
		row.className = 'bar-row';
		const name = document.createElement('span');
		name.className = 'bar-label';
		name.textContent = label;
		const track = document.createElement('div');
		track.className = 'bar-track';
		const bar = document.createElement('div');
		bar.className = 'bar';
		bar.dataset.type = key;
		bar.dataset.count = String(counts[i]);
		bar.style.width = `${(100 * counts[i]) / maxCount}%`;
		bar.style.backgroundColor = color;
		const value = document.createElement('span');
		value.className = 'bar-value';
		value.textContent = String(counts[i]);
		track.appendChild(bar);
		row.append(name, track, value);
		chart.appendChild(row);
	});
	container.appendChild(chart);

	// proportion heat bar; segment widths and labels derive from the counts
	const heat = document.createElement('div');
	heat.className = 'heat-bar';
	TYPE_LABELS.forEach(([key, label, color], i) => {
		const pct = total > 0 ? (100 * counts[i]) / total : 0;
		const segment = document.createElement('div');
		segment.className = 'heat-segment';
		segment.dataset.type = key;
		segment.dataset.pct = pct.toFixed(1);
		segment.style.width = `${pct}%`;
		segment.style.backgroundColor = color;
		segment.title = `${label}: ${pct.toFixed(1)}%`;
		heat.appendChild(segment);
	});
	container.appendChild(heat);

	const facts = document.createElement('dl');
	facts.className = 'district-facts';
	const rows: [string, number | undefined][] = [
		['villages', overview.n_villages],
		['total cases', overview.total],
		['male victims', overview.male],
		['female victims', overview.female],
		['low/mid income', overview.low_mid_income],
		['disability or mental illness', overview.disability],
	];
	if (overview.predicted_high_risk !== undefined) {
		rows.push(['predicted high-risk', overview.predicted_high_risk]);
	}
	for (const [label, value] of rows) {
		if (value === undefined) continue;
		const dt = document.createElement('dt');
		dt.textContent = label;
		const dd = document.createElement('dd');
		dd.dataset.fact = label;
		dd.textContent = String(value);
		facts.appendChild(dt);
		facts.appendChild(dd);
	}
	container.appendChild(facts);
}

export async function showDistrict(
	container: HTMLElement,
	api: ApiClient,
	districtId: string,
): Promise<void> {
	try {
		renderDistrictPanel(container, await api.getDistrict(districtId));
	} catch (error) {
		container.replaceChildren();
		const message = document.createElement('p');
		message.className = 'error-state';
		message.textContent =
			error instanceof ApiError && error.status === 404
				? `District ${districtId} not found.`
				: 'Could not load district overview.';
		container.appendChild(message);
	}
}
