// The explanation feed: cards with thumb ratings, pull-mode badges, and
// the follow-up chat input in interactive mode.

import type { FeedItem } from './viewmodel.js';

export interface FeedHandlers {
  onRate(instanceId: string, value: 'up' | 'down'): void;
  onRequest(): void;
  onQuery(text: string, parentInstanceId: string): void;
}

export function renderFeed(container: HTMLElement, feed: FeedItem[], handlers: FeedHandlers): void {
  container.textContent = '';
  for (const item of feed) {
    switch (item.kind) {
      case 'explanation':
        container.appendChild(buildCard(item, handlers));
        break;
      case 'available':
        container.appendChild(buildBadge(handlers));
        break;
      case 'blocked':
        container.appendChild(buildNotice(`The ${item.deviceId} did not respond.`, 'blocked-notice'));
        break;
      case 'ended':
        container.appendChild(buildNotice('The session has ended. Thank you!', 'session-ended'));
        break;
      case 'error':
        container.appendChild(buildNotice(item.text ?? 'Something went wrong.', 'error-notice'));
        break;
    }
  }
  container.scrollTop = container.scrollHeight;
}

function buildCard(item: FeedItem, handlers: FeedHandlers): HTMLElement {
  const card = document.createElement('div');
  card.className = 'explanation-card';
  if (item.instanceId) card.dataset.instanceId = item.instanceId;

  const text = document.createElement('p');
  text.textContent = item.text ?? '';
  card.appendChild(text);

  const thumbs = document.createElement('div');
  thumbs.className = 'thumbs';
  for (const value of ['up', 'down'] as const) {
    const button = document.createElement('button');
    button.className = `thumb thumb-${value}`;
    button.textContent = value === 'up' ? '👍' : '👎';
    if (item.rated === value) button.classList.add('selected');
    button.addEventListener('click', () => {
      if (item.instanceId) handlers.onRate(item.instanceId, value);
    });
    thumbs.appendChild(button);
  }
  card.appendChild(thumbs);

  if (item.interactive && item.instanceId) {
    card.appendChild(buildChatInput(item.instanceId, handlers));
  }
  return card;
}

function buildChatInput(parentInstanceId: string, handlers: FeedHandlers): HTMLElement {
  const form = document.createElement('form');
  form.className = 'chat-input';
  const input = document.createElement('input');
  input.type = 'text';
  input.placeholder = 'Ask a follow-up question…';
  const send = document.createElement('button');
  send.type = 'submit';
  send.textContent = 'Ask';
  form.appendChild(input);
  form.appendChild(send);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (input.value.trim()) {
      handlers.onQuery(input.value.trim(), parentInstanceId);
      input.value = '';
    }
  });
  return form;
}

function buildBadge(handlers: FeedHandlers): HTMLElement {
  const badge = document.createElement('button');
  badge.className = 'explanation-available';
  badge.textContent = 'An explanation is available — show it';
  badge.addEventListener('click', () => handlers.onRequest());
  return badge;
}

function buildNotice(message: string, className: string): HTMLElement {
  const notice = document.createElement('div');
  notice.className = `feed-notice ${className}`;
  notice.textContent = message;
  return notice;
}
