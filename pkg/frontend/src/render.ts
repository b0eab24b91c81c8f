// Rendering: canvas arena (agents as oriented markers, projectiles, HP
// bars), the branch diagram with cursor and active-action markers, the
// graft feed and the event log.  All of it is a pure function of the
// view model.

import type { BranchMessage, BranchNode, StateMessage } from './protocol.js';
import type { CockpitState } from './viewmodel.js';

export const ARENA_HALF_EXTENT = 10;

function toCanvas(x: number, y: number, size: number): [number, number] {
    const scale = size / (2 * ARENA_HALF_EXTENT);
    return [(x + ARENA_HALF_EXTENT) * scale, (ARENA_HALF_EXTENT - y) * scale];
}

const AGENT_COLORS: Record<string, string> = {
    player: '#ffd34d',
    opponent: '#7fb4ff',
};

export function drawArena(ctx: CanvasRenderingContext2D, state: StateMessage | null, size: number): void {
    ctx.clearRect(0, 0, size, size);
    ctx.fillStyle = '#14161c';
    ctx.fillRect(0, 0, size, size);
    ctx.strokeStyle = '#2e3340';
    ctx.strokeRect(1, 1, size - 2, size - 2);
    if (!state) return;

    for (const projectile of state.projectiles) {
        const [px, py] = toCanvas(projectile.x, projectile.y, size);
        ctx.beginPath();
        ctx.arc(px, py, 4, 0, Math.PI * 2);
        ctx.fillStyle = '#ffef96';
        ctx.fill();
    }

    for (const agent of state.agents) {
        const [ax, ay] = toCanvas(agent.x, agent.y, size);
        const color = AGENT_COLORS[agent.id] ?? '#cccccc';
        ctx.save();
        ctx.translate(ax, ay);
        ctx.rotate(-agent.facing);
        ctx.beginPath();
        ctx.moveTo(14, 0);
        ctx.lineTo(-9, 8);
        ctx.lineTo(-9, -8);
        ctx.closePath();
        ctx.fillStyle = color;
        ctx.fill();
        ctx.restore();

        const barWidth = 46;
        ctx.fillStyle = '#343b49';
        ctx.fillRect(ax - barWidth / 2, ay - 26, barWidth, 6);
        ctx.fillStyle = agent.hp > 30 ? '#6fd66f' : '#e0604f';
        ctx.fillRect(ax - barWidth / 2, ay - 26, (barWidth * agent.hp) / 100, 6);
        ctx.fillStyle = '#aab2c0';
        ctx.font = '11px sans-serif';
        ctx.fillText(`${agent.id} ${agent.hp}`, ax - barWidth / 2, ay - 30);
    }

    if (state.outcome !== 'ongoing') {
        ctx.fillStyle = 'rgba(10, 10, 14, 0.72)';
        ctx.fillRect(0, 0, size, size);
        ctx.fillStyle = '#ffffff';
        ctx.font = 'bold 28px sans-serif';
        ctx.textAlign = 'center';
        const label = state.outcome === 'draw' ? 'Draw' : `${state.outcome} wins`;
        ctx.fillText(label, size / 2, size / 2);
        ctx.textAlign = 'start';
    }
}

function nodeBadge(node: BranchNode, branch: BranchMessage): string {
    const marks: string[] = [];
    if (node.id === branch.current) marks.push('current');
    if (node.id === branch.active_action) marks.push('active');
    if (node.kind === 'condition' && node.fired === false) marks.push('armed');
    if (node.kind === 'condition' && node.fired === true) marks.push('fired');
    if (node.kind === 'action' && node.satisfied) marks.push('satisfied');
    return marks.length ? ` [${marks.join(', ')}]` : '';
}

/** Nested list mirroring the branch structure, cursor markers inline. */
export function renderBranch(container: HTMLElement, branch: BranchMessage | undefined): void {
    container.textContent = '';
    if (!branch || branch.root === null) {
        const empty = document.createElement('p');
        empty.className = 'muted';
        empty.textContent = 'empty branch (idle agent)';
        container.appendChild(empty);
        return;
    }
    const byId = new Map(branch.nodes.map((node) => [node.id, node]));

    const renderChain = (startId: number | null, parent: HTMLElement): void => {
        let id = startId;
        while (id !== null) {
            const node = byId.get(id);
            if (!node) return;
            const item = document.createElement('li');
            item.className = `node node-${node.kind}`;
            if (node.id === branch.current) item.classList.add('is-current');
            if (node.id === branch.active_action) item.classList.add('is-active');
            item.textContent = `${node.label}${nodeBadge(node, branch)}`;
            parent.appendChild(item);
            if (node.kind === 'condition' && node.true !== null && node.true !== undefined) {
                const sub = document.createElement('ul');
                sub.className = 'true-branch';
                item.appendChild(sub);
                renderChain(node.true, sub);
            }
            id = node.next;
        }
    };

    const list = document.createElement('ul');
    list.className = 'branch';
    renderChain(branch.root, list);
    container.appendChild(list);
}

export function renderFeed(container: HTMLElement, state: CockpitState): void {
    container.textContent = '';
    for (const item of [...state.graftFeed].reverse()) {
        const row = document.createElement('div');
        row.className = 'feed-item' + (item.superseded ? ' superseded' : '');
        const head = document.createElement('div');
        head.className = 'feed-head';
        head.textContent = `${item.agent} · ${item.rule} · ${item.latencyMs.toFixed(1)} ms`;
        const script = document.createElement('code');
        script.textContent = item.script;
        row.append(head, script);
        container.appendChild(row);
    }
}

export function renderHistory(container: HTMLElement, state: CockpitState): void {
    container.textContent = '';
    for (const item of [...state.history].reverse().slice(0, 20)) {
        const row = document.createElement('div');
        row.className = `history-item status-${item.status}`;
        row.textContent = item.error ? `${item.text} — ${item.error}` : item.text;
        container.appendChild(row);
    }
}

export function renderEvents(container: HTMLElement, state: CockpitState): void {
    container.textContent = '';
    for (const event of [...state.events].reverse().slice(0, 30)) {
        const row = document.createElement('div');
        row.className = 'event-item';
        const agent = event.agent ? ` ${event.agent}` : '';
        row.textContent = `t${event.tick}${agent} ${event.name} ${JSON.stringify(event.data)}`;
        container.appendChild(row);
    }
}

export function renderBanner(container: HTMLElement, state: CockpitState): void {
    container.className = `banner banner-${state.connection}`;
    container.textContent =
        state.connection === 'open' ? 'connected'
            : state.connection === 'connecting' ? 'connecting…'
                : 'disconnected — retrying';
}
