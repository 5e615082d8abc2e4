// Presentational quantile color scale for the choropleth. Edges are
// recomputed per layer; the legend shows them verbatim.

const PALETTE = ['#fee5d9', '#fcae91', '#fb6a4a', '#de2d26', '#a50f15'];
export const EMPTY_COLOR = '#e8e8e8';

export interface QuantileScale {
	edges: number[];
	colorFor(value: number): string;
}

export function quantileScale(values: number[]): QuantileScale {
	const positive = values.filter((v) => v > 0).sort((a, b) => a - b);
	if (positive.length === 0) {
		return { edges: [], colorFor: () => EMPTY_COLOR };
	}
	const edges: number[] = [];
	for (let i = 1; i < PALETTE.length; i++) {
		const pos = (i / PALETTE.length) * (positive.length - 1);
		const lo = Math.floor(pos);
		const frac = pos - lo;
		const edge =
			positive[lo] + (positive[Math.min(lo + 1, positive.length - 1)] - positive[lo]) * frac;
		edges.push(edge);
	}
	return {
		edges,
		colorFor(value: number): string {
			if (value <= 0) return EMPTY_COLOR;
			let band = 0;
			while (band < edges.length && value > edges[band]) band++;
			return PALETTE[band];
		},
	};
}
