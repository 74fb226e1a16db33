import type {
  ChoicesResponse,
  CompletionPayload,
  DisplayItem,
  EvaluationPayload,
  EvaluationReport,
  Recommendation,
  StepPayload,
} from './types';

// One screen active at a time: survey -> grid x2 -> pair x(T-2) -> results
// -> evaluate. All transitions are pure functions over this union so the
// flow is testable without a DOM.

export interface SurveyState {
  kind: 'survey';
}

export interface GridState {
  kind: 'grid';
  step: StepPayload;
  selected: string[];
}

export interface PairState {
  kind: 'pair';
  step: StepPayload;
}

export interface ResultsState {
  kind: 'results';
  sessionId: string;
  recommendations: Recommendation[];
}

export interface EvaluateState {
  kind: 'evaluate';
  sessionId: string;
  // items still awaiting judgment, in server order; judged items disappear
  pending: DisplayItem[];
  judged: number;
  total: number;
  report?: EvaluationReport;
}

export interface ErrorState {
  kind: 'error';
  message: string;
  recoverable: boolean;
}

export type UiState =
  | SurveyState
  | GridState
  | PairState
  | ResultsState
  | EvaluateState
  | ErrorState;

export const initialState: UiState = { kind: 'survey' };

export function fromStep(step: StepPayload): GridState | PairState {
  if (step.phase === 'grid10') {
    return { kind: 'grid', step, selected: [] };
  }
  return { kind: 'pair', step };
}

/** Toggle one grid tile; the selection buffer stays a subset of the display. */
export function toggleSelection(state: GridState, itemId: string): GridState {
  if (!state.step.items.some((item) => item.id === itemId)) {
    return state;
  }
  const selected = state.selected.includes(itemId)
    ? state.selected.filter((id) => id !== itemId)
    : [...state.selected, itemId];
  return { ...state, selected };
}

export function applyChoicesResponse(response: ChoicesResponse): UiState {
  if ('status' in response && response.status === 'completed') {
    return completionState(response);
  }
  return fromStep((response as { step: StepPayload }).step);
}

export function completionState(payload: CompletionPayload): ResultsState {
  return {
    kind: 'results',
    sessionId: payload.session_id,
    recommendations: payload.recommendations,
  };
}

export function evaluationState(
  payload: EvaluationPayload,
  report?: EvaluationReport,
): EvaluateState {
  return {
    kind: 'evaluate',
    sessionId: payload.session_id,
    pending: payload.items,
    judged: payload.judged,
    total: payload.total,
    report,
  };
}

/** A judged item disappears immediately; counts advance optimistically. */
export function judgeItem(state: EvaluateState, itemId: string): EvaluateState {
  if (!state.pending.some((item) => item.id === itemId)) {
    return state;
  }
  return {
    ...state,
    pending: state.pending.filter((item) => item.id !== itemId),
    judged: state.judged + 1,
  };
}

export function attachReport(state: EvaluateState, report: EvaluationReport): EvaluateState {
  return { ...state, report };
}

export function errorState(message: string, recoverable = true): ErrorState {
  return { kind: 'error', message, recoverable };
}

export function progressLabel(state: UiState): string {
  switch (state.kind) {
    case 'grid':
    case 'pair':
      return `${state.step.t} / ${state.step.T}`;
    case 'evaluate':
      return `${state.judged} / ${state.total}`;
    default:
      return '';
  }
}
