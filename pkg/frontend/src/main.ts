// Cockpit wiring: DOM, socket, render-on-change.

import { CockpitClient } from './client.js';
import {
    drawArena,
    renderBanner,
    renderBranch,
    renderEvents,
    renderFeed,
    renderHistory,
} from './render.js';

const params = new URLSearchParams(window.location.search);
const url = params.get('gateway') ?? `ws://${window.location.hostname || 'localhost'}:7778`;

const canvas = document.getElementById('arena') as HTMLCanvasElement;
const ctx = canvas.getContext('2d');
if (!ctx) throw new Error('2d canvas unsupported');

const banner = document.getElementById('banner') as HTMLElement;
const branchBox = document.getElementById('branch') as HTMLElement;
const feedBox = document.getElementById('feed') as HTMLElement;
const historyBox = document.getElementById('history') as HTMLElement;
const eventsBox = document.getElementById('events') as HTMLElement;
const input = document.getElementById('command') as HTMLInputElement;
const sendButton = document.getElementById('send') as HTMLButtonElement;
const resetButton = document.getElementById('reset') as HTMLButtonElement;

const client = new CockpitClient(url, (u) => new WebSocket(u), (state) => {
    renderBanner(banner, state);
    renderBranch(branchBox, state.branches['player']);
    renderFeed(feedBox, state);
    renderHistory(historyBox, state);
    renderEvents(eventsBox, state);
});
client.connect();

function frame(): void {
    drawArena(ctx!, client.state.lastState, canvas.width);
    requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

function submit(): void {
    if (client.submitCommand(input.value)) {
        input.value = '';
    }
    input.focus();
}

sendButton.addEventListener('click', submit);
input.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') submit();
});
resetButton.addEventListener('click', () => client.reset());
