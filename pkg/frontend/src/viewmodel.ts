// Cockpit view model: a pure reducer over server messages.  The cockpit
// holds no authoritative game state; feeding the same message sequence
// into the reducer always rebuilds the same model.

import type {
    BranchMessage,
    EventMessage,
    GraftMessage,
    ServerMessage,
    StateMessage,
} from './protocol.js';

export type ConnectionStatus = 'connecting' | 'open' | 'closed';

export interface GraftFeedItem {
    agent: string;
    rule: string;
    script: string;
    latencyMs: number;
    /** An earlier queued plan a later preempt graft cut off. */
    superseded: boolean;
}

export interface HistoryItem {
    id: number;
    text: string;
    status: 'pending' | 'acked' | 'error';
    error?: string;
}

export interface CockpitState {
    connection: ConnectionStatus;
    lastState: StateMessage | null;
    graftFeed: GraftFeedItem[];
    branches: Record<string, BranchMessage>;
    events: EventMessage[];
    history: HistoryItem[];
    lastError: string | null;
}

export const FEED_LIMIT = 50;
export const EVENT_LIMIT = 100;

export function initialState(): CockpitState {
    return {
        connection: 'connecting',
        lastState: null,
        graftFeed: [],
        branches: {},
        events: [],
        history: [],
        lastError: null,
    };
}

function applyGraft(state: CockpitState, msg: GraftMessage): CockpitState {
    let feed = state.graftFeed;
    if (msg.rule === 'PreemptSwitch') {
        // a preempt replaces everything queued after the cursor: earlier
        // feed entries for this agent render struck-through
        feed = feed.map((item) =>
            item.agent === msg.agent ? { ...item, superseded: true } : item);
    }
    feed = [...feed, {
        agent: msg.agent,
        rule: msg.rule,
        script: msg.script,
        latencyMs: msg.latency_ms,
        superseded: false,
    }];
    if (feed.length > FEED_LIMIT) feed = feed.slice(feed.length - FEED_LIMIT);
    return { ...state, graftFeed: feed };
}

export function reduce(state: CockpitState, msg: ServerMessage): CockpitState {
    switch (msg.type) {
        case 'state': {
            // a tick-0 state after a reset invalidates stale branch models
            const branches = msg.tick === 0 ? {} : state.branches;
            return { ...state, lastState: msg, branches };
        }
        case 'graft':
            return applyGraft(state, msg);
        case 'branch':
            return { ...state, branches: { ...state.branches, [msg.agent]: msg } };
        case 'event': {
            let events = [...state.events, msg];
            if (events.length > EVENT_LIMIT) events = events.slice(events.length - EVENT_LIMIT);
            return { ...state, events };
        }
        case 'ack': {
            if (msg.id === undefined) return state;
            const history = state.history.map((item) =>
                item.id === msg.id && item.status === 'pending'
                    ? { ...item, status: 'acked' as const }
                    : item);
            return { ...state, history };
        }
        case 'error': {
            // errors carry no correlation id: attach to the newest command
            // that has not already failed (single-user flow is serial)
            const target = state.history.filter((i) => i.status !== 'error').at(-1);
            const history = state.history.map((item) =>
                item === target ? { ...item, status: 'error' as const, error: msg.message } : item);
            return { ...state, history, lastError: msg.message };
        }
        default:
            return state;
    }
}

export function noteCommandSent(state: CockpitState, id: number, text: string): CockpitState {
    return {
        ...state,
        history: [...state.history, { id, text, status: 'pending' }],
    };
}

export function noteConnection(state: CockpitState, status: ConnectionStatus): CockpitState {
    return { ...state, connection: status, lastError: status === 'open' ? null : state.lastError };
}
