import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { renderDistrictPanel, showDistrict } from '../src/district.js';
import { districtFixture, jsonResponse } from './fixtures.js';

describe('renderDistrictPanel', () => {
	let container: HTMLElement;

	beforeEach(() => {
		document.body.innerHTML = '<div id="detail"></div>';
		container = document.getElementById('detail')!;
	});

	it('bar values equal the API counts exactly', () => {
		const overview = districtFixture();
		renderDistrictPanel(container, overview);
		for (const key of [
			'count_IPV',
			'count_child_adolescent',
			'count_elderly',
			'count_intersibling_other',
		] as const) {
			const bar = container.querySelector(`.bar[data-type="${key}"]`) as HTMLElement;
			expect(bar.dataset.count).toBe(String(overview[key]));
		}
	});

	it('heat-bar proportions sum to 100 within rounding', () => {
		renderDistrictPanel(container, districtFixture());
		const pcts = [...container.querySelectorAll('.heat-segment')].map((el) =>
			parseFloat((el as HTMLElement).dataset.pct!),
		);
		const sum = pcts.reduce((a, b) => a + b, 0);
		expect(Math.abs(sum - 100)).toBeLessThanOrEqual(0.3);
	});

	it('shows income, disability, and predicted high-risk counts from the payload', () => {
		const overview = districtFixture();
		renderDistrictPanel(container, overview);
		const fact = (label: string) =>
			container.querySelector(`dd[data-fact="${label}"]`)?.textContent;
		expect(fact('low/mid income')).toBe(String(overview.low_mid_income));
		expect(fact('disability or mental illness')).toBe(String(overview.disability));
		expect(fact('predicted high-risk')).toBe(String(overview.predicted_high_risk));
	});

	it('an empty district renders zero-width bars without error', () => {
		const empty = {
			...districtFixture(),
			total: 0,
			count_IPV: 0,
			count_child_adolescent: 0,
			count_elderly: 0,
			count_intersibling_other: 0,
		};
		renderDistrictPanel(container, empty);
		const bars = [...container.querySelectorAll('.bar')] as HTMLElement[];
		expect(bars.every((b) => b.style.width === '0%')).toBe(true);
	});
});

describe('showDistrict', () => {
	afterEach(() => vi.unstubAllGlobals());

	it('renders the overview on success', async () => {
		const overview = districtFixture();
		vi.stubGlobal('fetch', vi.fn().mockImplementation(() => Promise.resolve(jsonResponse(overview))));
		const container = document.createElement('div');
		await showDistrict(container, new ApiClient(), 'D07');
		expect(container.querySelector('h3')?.textContent).toContain('D07');
	});

	it('404 shows an inline not-found message', async () => {
		vi.stubGlobal(
			'fetch',
			vi.fn().mockImplementation(() => Promise.resolve(jsonResponse({ error: "unknown district 'D99'" }, 404))),
		);
		const container = document.createElement('div');
		await showDistrict(container, new ApiClient(), 'D99');
		expect(container.querySelector('.error-state')?.textContent).toContain('D99 not found');
	});
});
