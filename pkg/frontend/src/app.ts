/** Minimal DOM wiring: chat panel on the left, pipeline inspector on the
 * right. Everything interesting lives in reducer.ts / diff.ts / client.ts;
 * this file only renders the current ViewState. */

import { BusySendError, InspectorClient } from './client.js';
import { diffWords } from './diff.js';
import { currentNarrative, previousNarrative } from './reducer.js';
import type { ViewState } from './types.js';

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function text(tag: string, content: string, className = ''): HTMLElement {
  const node = document.createElement(tag);
  node.textContent = content;
  if (className) node.className = className;
  return node;
}

function renderChat(state: ViewState): void {
  const pane = el('chat');
  pane.replaceChildren();
  for (const turn of state.turns) {
    pane.appendChild(text('div', turn.user, 'bubble user'));
    if (turn.assistant !== null) {
      const bubble = text('div', turn.assistant, 'bubble assistant');
      if (turn.latencyMs !== null) {
        bubble.appendChild(text('span', `${turn.latencyMs}ms`, 'latency'));
      }
      pane.appendChild(bubble);
    }
  }
  pane.scrollTop = pane.scrollHeight;
}

function renderThreads(state: ViewState): void {
  const pane = el('threads');
  pane.replaceChildren();
  const latest = state.threads[state.threads.length - 1];
  if (!latest) return;
  for (const key of ['goal', 'reasoning', 'memory'] as const) {
    pane.appendChild(text('h3', key));
    pane.appendChild(text('p', latest[key]));
  }
}

function renderNarrative(state: ViewState): void {
  const pane = el('narrative');
  pane.replaceChildren();
  const current = currentNarrative(state);
  if (!current) return;
  if (current.stale) {
    pane.appendChild(text('span', 'stale', 'badge stale'));
  }
  const previous = previousNarrative(state);
  if (!previous) {
    pane.appendChild(text('p', current.text));
    return;
  }
  const paragraph = document.createElement('p');
  for (const token of diffWords(previous.text, current.text)) {
    if (token.op === 'removed') continue;
    paragraph.appendChild(
      text('span', token.text, token.op === 'added' ? 'diff-added' : ''),
    );
  }
  pane.appendChild(paragraph);
}

function renderStatus(state: ViewState, connected: boolean): void {
  const jobs = state.jobs.map((j) => `turn ${j.turnIndex}: ${j.status}`).join('  ');
  const queue = state.queue
    ? `queue mean ${state.queue.meanLength.toFixed(2)} max ${state.queue.maxLength}`
    : '';
  const gaps = state.gaps.length ? ` missing events: ${state.gaps.join(', ')}` : '';
  el('status').textContent =
    `${connected ? 'connected' : 'disconnected'}  ${jobs}  ${queue}${gaps}`;
  el('status').classList.toggle('gap-warning', state.gaps.length > 0);
  (el('send') as HTMLButtonElement).disabled = state.pendingSend || !connected;
  (el('input') as HTMLInputElement).disabled = state.pendingSend || !connected;
}

export function mount(baseUrl: string, sessionId: string): InspectorClient {
  let connected = false;
  const client = new InspectorClient({
    baseUrl,
    sessionId,
    onChange: (state) => {
      renderChat(state);
      renderThreads(state);
      renderNarrative(state);
      renderStatus(state, connected);
    },
    onConnectionChange: (isConnected) => {
      connected = isConnected;
      renderStatus(client.state, connected);
    },
  });
  el('send').addEventListener('click', async () => {
    const input = el('input') as HTMLInputElement;
    if (!input.value.trim()) return;
    try {
      await client.sendMessage(input.value);
      input.value = '';
    } catch (error) {
      el('status').textContent =
        error instanceof BusySendError
          ? 'busy: wait for the current reply'
          : String(error);
    }
  });
  client.connect();
  return client;
}
