import { ApiClient, ApiError } from './api';
import {
  applyChoicesResponse,
  attachReport,
  errorState,
  evaluationState,
  fromStep,
  initialState,
  judgeItem,
  progressLabel,
  toggleSelection,
  type EvaluateState,
  type GridState,
  type PairState,
  type UiState,
} from './state';
import type { Diet, Directive, DisplayItem, SurveyAnswers } from './types';

const DIETS: Diet[] = ['no_restrictions', 'vegetarian', 'vegan', 'kosher', 'halal'];
const DIRECTIVES: Directive[] = ['reduce', 'maintain', 'increase'];
const PLACEHOLDER_IMAGE =
  'data:image/svg+xml,' +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="160" height="120">' +
      '<rect width="100%" height="100%" fill="#d8d8d8"/>' +
      '<text x="50%" y="50%" text-anchor="middle" fill="#666">no image</text></svg>',
  );

export class App {
  state: UiState = initialState;
  private sessionId = '';

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  start(): void {
    this.render();
  }

  private setState(state: UiState): void {
    this.state = state;
    this.render();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409 && this.sessionId) {
        // another request is (or was) in flight; the server knows the truth
        await this.resync();
        return;
      }
      const message = err instanceof Error ? err.message : String(err);
      this.setState(errorState(message));
    }
  }

  private async resync(): Promise<void> {
    const record = await this.api.getSession(this.sessionId);
    if (record.status === 'completed' && record.recommendations) {
      this.setState({
        kind: 'results',
        sessionId: this.sessionId,
        recommendations: record.recommendations,
      });
    } else if (record.step) {
      this.setState(fromStep(record.step));
    } else {
      this.setState(errorState('session is no longer active', false));
    }
  }

  async submitSurvey(answers: SurveyAnswers): Promise<void> {
    await this.guard(async () => {
      const response = await this.api.createSession(answers);
      this.sessionId = response.session_id;
      this.setState(fromStep(response.step));
    });
  }

  async confirmGrid(): Promise<void> {
    if (this.state.kind !== 'grid') return;
    const selected = this.state.selected;
    await this.guard(async () => {
      this.setState(applyChoicesResponse(await this.api.submitChoices(this.sessionId, selected)));
    });
  }

  async answerPair(selected: string[]): Promise<void> {
    if (this.state.kind !== 'pair') return;
    await this.guard(async () => {
      this.setState(applyChoicesResponse(await this.api.submitChoices(this.sessionId, selected)));
    });
  }

  async startEvaluation(): Promise<void> {
    if (this.state.kind !== 'results') return;
    await this.guard(async () => {
      this.setState(evaluationState(await this.api.getEvaluation(this.sessionId)));
    });
  }

  async judge(itemId: string, accepted: boolean): Promise<void> {
    if (this.state.kind !== 'evaluate') return;
    const optimistic = judgeItem(this.state, itemId);
    await this.guard(async () => {
      this.setState(optimistic);
      const response = await this.api.postVerdicts(this.sessionId, { [itemId]: accepted });
      if (this.state.kind === 'evaluate' && response.report) {
        this.setState(attachReport(this.state, response.report));
      }
    });
  }

  // --- rendering ---

  render(): void {
    this.root.replaceChildren();
    const progress = progressLabel(this.state);
    if (progress) {
      const bar = el('div', 'progress');
      bar.textContent = progress;
      this.root.append(bar);
    }
    switch (this.state.kind) {
      case 'survey':
        this.renderSurvey();
        break;
      case 'grid':
        this.renderGrid(this.state);
        break;
      case 'pair':
        this.renderPair(this.state);
        break;
      case 'results':
        this.renderResults();
        break;
      case 'evaluate':
        this.renderEvaluation(this.state);
        break;
      case 'error':
        this.renderError();
        break;
    }
  }

  private renderSurvey(): void {
    const form = el('form', 'survey');
    form.append(heading('Tell us about your goals'));
    const selects: Record<string, HTMLSelectElement> = {};
    selects.diet = labeledSelect(form, 'diet', 'Dietary restriction', DIETS);
    for (const nutrient of ['calories', 'protein', 'fat'] as const) {
      selects[nutrient] = labeledSelect(form, nutrient, `Goal for ${nutrient}`, DIRECTIVES, 'maintain');
    }
    const submit = button('Start the quiz', 'primary');
    submit.type = 'submit';
    form.append(submit);
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.submitSurvey({
        diet: selects.diet.value as Diet,
        calories: selects.calories.value as Directive,
        protein: selects.protein.value as Directive,
        fat: selects.fat.value as Directive,
      });
    });
    this.root.append(form);
  }

  private renderGrid(state: GridState): void {
    this.root.append(heading('Tap everything that looks delicious'));
    const grid = el('div', 'grid');
    for (const item of state.step.items) {
      const tile = itemCard(item);
      tile.classList.add('tile');
      tile.dataset.itemId = item.id;
      if (state.selected.includes(item.id)) tile.classList.add('selected');
      tile.addEventListener('click', () => {
        if (this.state.kind === 'grid') this.setState(toggleSelection(this.state, item.id));
      });
      grid.append(tile);
    }
    this.root.append(grid);
    const confirm = button('Confirm', 'primary');
    confirm.disabled = this.api.busy;
    confirm.addEventListener('click', () => void this.confirmGrid());
    this.root.append(confirm);
  }

  private renderPair(state: PairState): void {
    this.root.append(heading('Which looks better?'));
    const row = el('div', 'pair');
    for (const item of state.step.items) {
      const card = itemCard(item);
      card.classList.add('tile');
      card.dataset.itemId = item.id;
      card.addEventListener('click', () => void this.answerPair([item.id]));
      row.append(card);
    }
    this.root.append(row);
    const yuck = button('Yuck — neither', 'yuck');
    yuck.disabled = this.api.busy;
    yuck.addEventListener('click', () => void this.answerPair([]));
    this.root.append(yuck);
  }

  private renderResults(): void {
    if (this.state.kind !== 'results') return;
    this.root.append(heading('Your meal recommendations'));
    const list = el('div', 'results');
    for (const rec of this.state.recommendations) {
      const card = itemCard(rec);
      const facts = el('div', 'facts');
      facts.textContent = `${Math.round(rec.calories)} kcal · ${Math.round(rec.protein)}g protein · ${Math.round(rec.fat)}g fat`;
      card.append(facts);
      list.append(card);
    }
    this.root.append(list);
    const evaluate = button('Rate these meals', 'primary');
    evaluate.addEventListener('click', () => void this.startEvaluation());
    this.root.append(evaluate);
  }

  private renderEvaluation(state: EvaluateState): void {
    this.root.append(heading('Yummy or No way?'));
    if (state.report) {
      const done = el('div', 'report');
      done.textContent = `Thanks! You judged ${state.report.total_judged} meals.`;
      this.root.append(done);
      return;
    }
    const list = el('div', 'evaluation');
    for (const item of state.pending) {
      const card = itemCard(item);
      card.dataset.itemId = item.id;
      const controls = el('div', 'buckets');
      const yummy = button('Yummy', 'yummy');
      yummy.addEventListener('click', () => void this.judge(item.id, true));
      const noway = button('No way', 'noway');
      noway.addEventListener('click', () => void this.judge(item.id, false));
      controls.append(yummy, noway);
      card.append(controls);
      list.append(card);
    }
    this.root.append(list);
  }

  private renderError(): void {
    if (this.state.kind !== 'error') return;
    const box = el('div', 'error');
    box.textContent = this.state.message;
    this.root.append(box);
    if (this.state.recoverable && this.sessionId) {
      const retry = button('Retry', 'primary');
      retry.addEventListener('click', () => void this.guard(() => this.resync()));
      this.root.append(retry);
    }
  }
}

// --- small DOM helpers ---

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function heading(text: string): HTMLElement {
  const node = el('h2', 'heading');
  node.textContent = text;
  return node;
}

function button(label: string, className: string): HTMLButtonElement {
  const node = document.createElement('button');
  node.type = 'button';
  node.className = className;
  node.textContent = label;
  return node;
}

function itemCard(item: DisplayItem): HTMLElement {
  const card = el('div', 'card');
  const img = document.createElement('img');
  img.src = item.image_url;
  img.alt = item.name;
  img.addEventListener('error', () => {
    img.src = PLACEHOLDER_IMAGE;
  });
  const name = el('div', 'name');
  name.textContent = item.name;
  card.append(img, name);
  return card;
}

function labeledSelect(
  form: HTMLElement,
  name: string,
  label: string,
  options: readonly string[],
  preselect?: string,
): HTMLSelectElement {
  const wrapper = el('label', 'field');
  const caption = el('span', 'caption');
  caption.textContent = label;
  const select = document.createElement('select');
  select.name = name;
  for (const option of options) {
    const node = document.createElement('option');
    node.value = option;
    node.textContent = option.replace(/_/g, ' ');
    if (option === preselect) node.selected = true;
    select.append(node);
  }
  wrapper.append(caption, select);
  form.append(wrapper);
  return select;
}
