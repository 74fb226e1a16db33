// Payload shapes of the HTTP API. The client consumes only these endpoints;
// it never reads files or computes statistics itself.

export type Diet =
  | 'no_restrictions'
  | 'vegetarian'
  | 'vegan'
  | 'kosher'
  | 'halal';

export type Directive = 'reduce' | 'maintain' | 'increase';

export interface SurveyAnswers {
  diet: Diet;
  calories: Directive;
  protein: Directive;
  fat: Directive;
}

export type StepPhase = 'grid10' | 'pair';

export interface DisplayItem {
  id: string;
  name: string;
  image_url: string;
}

export interface StepPayload {
  session_id: string;
  t: number;
  T: number;
  phase: StepPhase;
  items: DisplayItem[];
}

export interface Recommendation {
  id: string;
  name: string;
  image_url: string;
  calories: number;
  protein: number;
  fat: number;
}

export interface CompletionPayload {
  session_id: string;
  status: 'completed';
  recommendations: Recommendation[];
}

export type ChoicesResponse = CompletionPayload | { session_id: string; step: StepPayload };

export interface CreateSessionResponse {
  session_id: string;
  step: StepPayload;
}

export interface EvaluationPayload {
  session_id: string;
  items: DisplayItem[];
  judged: number;
  total: number;
}

export interface ArmMetrics {
  acceptance_rate: number;
  mae: number;
  rmse: number;
}

export interface EvaluationReport {
  total_judged: number;
  learned: ArmMetrics;
  baseline: ArmMetrics;
  difference: number;
}

export interface VerdictsResponse {
  session_id: string;
  judged: number;
  total: number;
  report?: EvaluationReport;
}

export interface SessionRecord {
  session_id: string;
  status: 'awaiting_choices' | 'completed' | 'abandoned';
  step?: StepPayload;
  recommendations?: Recommendation[];
}
