// Wire protocol shared with the gateway: one JSON object per message.
// The cockpit is a pure protocol client; everything it renders is rebuilt
// from these messages.

export interface AgentState {
    id: string;
    x: number;
    y: number;
    facing: number;
    hp: number;
}

export interface ProjectileState {
    x: number;
    y: number;
}

export type Outcome = 'ongoing' | 'player' | 'opponent' | 'draw';

export interface StateMessage {
    type: 'state';
    tick: number;
    agents: AgentState[];
    projectiles: ProjectileState[];
    outcome: Outcome;
}

export interface GraftMessage {
    type: 'graft';
    agent: string;
    rule: string;
    script: string;
    latency_ms: number;
}

export interface ErrorMessage {
    type: 'error';
    message: string;
}

export interface AckMessage {
    type: 'ack';
    id?: number;
}

export type NodeKind = 'action' | 'condition' | 'repeat' | 'then';

export interface BranchNode {
    id: number;
    kind: NodeKind;
    label: string;
    next: number | null;
    true?: number | null;
    satisfied?: boolean;
    fired?: boolean;
    count?: number | 'forever';
    remaining?: number | 'forever' | null;
}

export interface BranchMessage {
    type: 'branch';
    agent: string;
    tick: number;
    root: number | null;
    current: number | null;
    active_action: number | null;
    nodes: BranchNode[];
}

export interface EventMessage {
    type: 'event';
    tick: number;
    agent?: string;
    name: string;
    data: Record<string, unknown>;
}

export type ServerMessage =
    | StateMessage
    | GraftMessage
    | ErrorMessage
    | AckMessage
    | BranchMessage
    | EventMessage;

const SERVER_TYPES = new Set(['state', 'graft', 'error', 'ack', 'branch', 'event']);

/** Parse one wire line; null for anything that is not a known message. */
export function parseServerMessage(raw: string): ServerMessage | null {
    let parsed: unknown;
    try {
        parsed = JSON.parse(raw);
    } catch {
        return null;
    }
    if (typeof parsed !== 'object' || parsed === null) return null;
    const msg = parsed as { type?: unknown };
    if (typeof msg.type !== 'string' || !SERVER_TYPES.has(msg.type)) return null;
    switch (msg.type) {
        case 'state': {
            const m = parsed as StateMessage;
            if (typeof m.tick !== 'number' || !Array.isArray(m.agents)
                || !Array.isArray(m.projectiles) || typeof m.outcome !== 'string') return null;
            return m;
        }
        case 'graft': {
            const m = parsed as GraftMessage;
            if (typeof m.agent !== 'string' || typeof m.rule !== 'string'
                || typeof m.script !== 'string') return null;
            return m;
        }
        case 'error': {
            const m = parsed as ErrorMessage;
            return typeof m.message === 'string' ? m : null;
        }
        case 'branch': {
            const m = parsed as BranchMessage;
            return Array.isArray(m.nodes) && typeof m.agent === 'string' ? m : null;
        }
        case 'event': {
            const m = parsed as EventMessage;
            return typeof m.name === 'string' && typeof m.tick === 'number' ? m : null;
        }
        default:
            return parsed as AckMessage;
    }
}

export function commandMessage(text: string, agent = 'player', id?: number): string {
    const msg: Record<string, unknown> = { type: 'command', agent, text };
    if (id !== undefined) msg.id = id;
    return JSON.stringify(msg);
}

export function resetMessage(id?: number): string {
    const msg: Record<string, unknown> = { type: 'reset' };
    if (id !== undefined) msg.id = id;
    return JSON.stringify(msg);
}

export function subscribeMessage(channels: string[] = ['state', 'branch', 'events']): string {
    return JSON.stringify({ type: 'subscribe', channels });
}
