// Session-side bookkeeping mirrored from server responses. The UI never
// computes its own statistics for display; it trusts /stats, but the local
// history allows cross-checking them.

import type { ChoiceResponse, RoundView, SessionStats, Side } from "./types.js";

export interface HistoryEntry {
  roundId: string;
  symbol: number;
  pick: Side;
  correct: boolean;
}

export interface UiState {
  sessionId: string | null;
  round: RoundView | null;
  history: HistoryEntry[];
  stats: SessionStats | null;
  error: string | null;
}

export function initialState(): UiState {
  return { sessionId: null, round: null, history: [], stats: null, error: null };
}

export function withSession(state: UiState, sessionId: string): UiState {
  return { ...initialState(), sessionId };
}

export function withRound(state: UiState, round: RoundView): UiState {
  return { ...state, round, error: null };
}

export function withChoice(state: UiState, pick: Side, resp: ChoiceResponse): UiState {
  if (!state.round) return state;
  const entry: HistoryEntry = {
    roundId: state.round.round_id,
    symbol: state.round.symbol,
    pick,
    correct: resp.correct,
  };
  return {
    ...state,
    round: null,
    history: [...state.history, entry],
    stats: resp.stats,
  };
}

export function withError(state: UiState, message: string): UiState {
  return { ...state, error: message };
}

/** Local fold over the history; must agree with the server's stats. */
export function localSuccess(state: UiState): { rounds: number; wins: number; rate: number | null } {
  const rounds = state.history.length;
  const wins = state.history.filter((h) => h.correct).length;
  return { rounds, wins, rate: rounds ? (100 * wins) / rounds : null };
}

export function formatPValue(p: number): string {
  if (p >= 0.001) return p.toFixed(3);
  return p.toExponential(2);
}
