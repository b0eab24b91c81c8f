// Gateway client: one socket, automatic reconnect with backoff, and the
// view-model reducer driving every change notification.  The socket
// implementation is injected so tests (and Node) can supply their own.

import { reconnectDelayMs } from './backoff.js';
import { commandMessage, parseServerMessage, resetMessage, subscribeMessage } from './protocol.js';
import {
    CockpitState,
    initialState,
    noteCommandSent,
    noteConnection,
    reduce,
} from './viewmodel.js';

export interface SocketLike {
    send(data: string): void;
    close(): void;
    // handler shapes kept loose so both browser WebSocket and ws fit
    onopen: ((event?: any) => void) | null;
    onmessage: ((event: any) => void) | null;
    onclose: ((event?: any) => void) | null;
    onerror: ((event?: any) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
    channels?: string[];
    setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export class CockpitClient {
    state: CockpitState = initialState();

    private socket: SocketLike | null = null;
    private attempts = 0;
    private stopped = false;
    private nextId = 1;
    private readonly channels: string[];
    private readonly schedule: (fn: () => void, ms: number) => unknown;

    constructor(
        private readonly url: string,
        private readonly factory: SocketFactory,
        private readonly onChange: (state: CockpitState) => void = () => {},
        options: ClientOptions = {},
    ) {
        this.channels = options.channels ?? ['state', 'branch', 'events'];
        this.schedule = options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    }

    connect(): void {
        this.stopped = false;
        this.update(noteConnection(this.state, 'connecting'));
        const socket = this.factory(this.url);
        this.socket = socket;
        socket.onopen = () => {
            this.attempts = 0;
            socket.send(subscribeMessage(this.channels));
            this.update(noteConnection(this.state, 'open'));
        };
        socket.onmessage = (event) => {
            const message = parseServerMessage(String(event.data));
            if (message) this.update(reduce(this.state, message));
        };
        socket.onerror = () => { /* onclose follows and owns the retry */ };
        socket.onclose = () => {
            this.socket = null;
            this.update(noteConnection(this.state, 'closed'));
            if (!this.stopped) {
                const delay = reconnectDelayMs(this.attempts);
                this.attempts += 1;
                this.schedule(() => {
                    if (!this.stopped) this.connect();
                }, delay);
            }
        };
    }

    get connected(): boolean {
        return this.state.connection === 'open' && this.socket !== null;
    }

    /** Send a command; empty input is blocked client-side. */
    submitCommand(text: string, agent = 'player'): boolean {
        const trimmed = text.trim();
        if (!trimmed || !this.connected || !this.socket) return false;
        const id = this.nextId;
        this.nextId += 1;
        this.socket.send(commandMessage(trimmed, agent, id));
        this.update(noteCommandSent(this.state, id, trimmed));
        return true;
    }

    reset(): boolean {
        if (!this.connected || !this.socket) return false;
        this.socket.send(resetMessage());
        return true;
    }

    close(): void {
        this.stopped = true;
        const socket = this.socket;
        this.socket = null;
        if (socket) {
            socket.onclose = null;  // deliberate close: no retry, no late event
            socket.close();
        }
        this.update(noteConnection(this.state, 'closed'));
    }

    private update(state: CockpitState): void {
        this.state = state;
        this.onChange(state);
    }
}
