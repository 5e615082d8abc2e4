// Case intake form: client-side validation mirrors the service's field
// rules, so an invalid submission never reaches the network. The result
// panel displays exactly what the score endpoint returned.

import { ApiError, type ApiClient, type ScoreRequest, type ScoreResponse } from './api.js';

interface FieldSpec {
	name: string;
	label: string;
	kind: 'int' | 'text' | 'select';
	required: boolean;
	options?: string[];
}

export const INTAKE_FIELDS: FieldSpec[] = [
	{ name: 'tipvda_score', label: 'Danger assessment score', kind: 'int', required: true },
	{ name: 'dv_duration_months', label: 'Abuse duration (months)', kind: 'int', required: true },
	{ name: 'maimed', label: 'Injury form', kind: 'text', required: true },
	{ name: 'occupation', label: 'Victim occupation', kind: 'text', required: true },
	{ name: 'education', label: 'Victim education', kind: 'text', required: true },
	{ name: 'district', label: 'District', kind: 'text', required: true },
	{ name: 'victim_age', label: 'Victim age', kind: 'int', required: false },
	{
		name: 'victim_gender',
		label: 'Victim gender',
		kind: 'select',
		required: false,
		options: ['', 'female', 'male'],
	},
];

export function validateIntake(values: Record<string, string>): Record<string, string> {
	const errors: Record<string, string> = {};
	for (const field of INTAKE_FIELDS) {
		const raw = (values[field.name] ?? '').trim();
		if (!raw) {
			if (field.required) errors[field.name] = 'required';
			continue;
		}
		if (field.kind === 'int') {
			if (!/^\d+$/.test(raw)) {
				errors[field.name] = 'must be a nonnegative integer';
			}
		}
		if (field.kind === 'select' && field.options && !field.options.includes(raw)) {
			errors[field.name] = 'invalid choice';
		}
	}
	return errors;
}

export function buildScoreRequest(values: Record<string, string>): ScoreRequest {
	const request: ScoreRequest = {
		tipvda_score: parseInt(values.tipvda_score, 10),
		dv_duration_months: parseInt(values.dv_duration_months, 10),
		maimed: values.maimed.trim(),
		occupation: values.occupation.trim(),
		education: values.education.trim(),
		district: values.district.trim(),
	};
	if (values.victim_age?.trim()) request.victim_age = parseInt(values.victim_age, 10);
	if (values.victim_gender?.trim()) request.victim_gender = values.victim_gender.trim();
	return request;
}

const BAND_COLORS: Record<ScoreResponse['risk_level'], string> = {
	low: '#2e7d32',
	elevated: '#ef6c00',
	high: '#c62828',
};

export function renderScorePanel(container: HTMLElement, score: ScoreResponse): void {
	container.replaceChildren();
	const band = document.createElement('div');
	band.className = 'risk-band';
	band.dataset.riskLevel = score.risk_level;
	band.style.backgroundColor = BAND_COLORS[score.risk_level];
	band.textContent = score.risk_level.toUpperCase();
	const prob = document.createElement('p');
	prob.className = 'risk-probability';
	prob.dataset.probability = String(score.probability);
	prob.textContent = `repeat-victimization probability: ${score.probability}`;
	const label = document.createElement('p');
	label.textContent = score.label === 1 ? 'flagged for follow-up' : 'not flagged';
	const version = document.createElement('p');
	version.className = 'model-version';
	version.textContent = `model ${score.model_version}`;
	container.append(band, prob, label, version);
}

export class IntakeForm {
	readonly form: HTMLFormElement;

	constructor(
		private readonly api: ApiClient,
		private readonly resultPanel: HTMLElement,
	) {
		this.form = document.createElement('form');
		this.form.className = 'intake-form';
		this.form.noValidate = true;
		for (const field of INTAKE_FIELDS) {
			this.form.appendChild(this.renderField(field));
		}
		const submit = document.createElement('button');
		submit.type = 'submit';
		submit.textContent = 'Score case';
		this.form.appendChild(submit);
		this.form.addEventListener('submit', (event) => {
			event.preventDefault();
			void this.submit();
		});
	}

	private renderField(field: FieldSpec): HTMLElement {
		const wrap = document.createElement('label');
		wrap.className = 'intake-field';
		const caption = document.createElement('span');
		caption.textContent = field.required ? `${field.label} *` : field.label;
		wrap.appendChild(caption);
		let input: HTMLInputElement | HTMLSelectElement;
		if (field.kind === 'select') {
			input = document.createElement('select');
			for (const option of field.options ?? []) {
				const el = document.createElement('option');
				el.value = option;
				el.textContent = option || '(unspecified)';
				input.appendChild(el);
			}
		} else {
			input = document.createElement('input');
			input.type = 'text';
		}
		input.name = field.name;
		wrap.appendChild(input);
		const error = document.createElement('span');
		error.className = 'field-error';
		error.dataset.errorFor = field.name;
		wrap.appendChild(error);
		return wrap;
	}

	values(): Record<string, string> {
		const out: Record<string, string> = {};
		for (const field of INTAKE_FIELDS) {
			const input = this.form.elements.namedItem(field.name) as
				| HTMLInputElement
				| HTMLSelectElement
				| null;
			out[field.name] = input?.value ?? '';
		}
		return out;
	}

	showErrors(errors: Record<string, string>): void {
		for (const field of INTAKE_FIELDS) {
			const slot = this.form.querySelector(
				`[data-error-for="${field.name}"]`,
			) as HTMLElement | null;
			if (slot) slot.textContent = errors[field.name] ?? '';
		}
	}

	async submit(): Promise<void> {
		const values = this.values();
		const errors = validateIntake(values);
		this.showErrors(errors);
		if (Object.keys(errors).length > 0) {
			return; // invalid input never reaches the network
		}
		try {
			const score = await this.api.score(buildScoreRequest(values));
			renderScorePanel(this.resultPanel, score);
		} catch (error) {
			this.resultPanel.replaceChildren();
			const message = document.createElement('p');
			message.className = 'error-state';
			if (error instanceof ApiError) {
				if (error.status === 503) {
					message.textContent = 'model unavailable';
				} else if (error.fieldErrors) {
					this.showErrors(error.fieldErrors);
					message.textContent = 'the service rejected some fields';
				} else {
					message.textContent = error.message;
				}
			} else {
				message.textContent = 'scoring failed';
			}
			this.resultPanel.appendChild(message);
		}
	}
}
