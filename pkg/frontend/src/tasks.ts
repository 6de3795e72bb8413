// Participant task list with live statuses.

import type { TaskInfo } from './protocol.js';

const STATUS_LABELS: Record<TaskInfo['status'], string> = {
  locked: '🔒',
  active: '▶',
  completed: '✓',
  timedOut: '⏰',
  aborted: '✗',
};

export function renderTaskList(
  container: HTMLElement,
  descriptions: { id: string; description: string; abortable: boolean }[],
  states: Record<string, TaskInfo>,
  onAbort: (taskId: string) => void,
): void {
  container.textContent = '';
  const list = document.createElement('ul');
  list.className = 'task-list';
  for (const task of descriptions) {
    const state = states[task.id];
    if (!state || state.status === 'locked') continue; // hidden until unlocked
    const item = document.createElement('li');
    item.className = `task task-${state.status}`;
    item.dataset.taskId = task.id;
    item.textContent = `${STATUS_LABELS[state.status]} ${task.description}`;
    if (task.abortable && state.status === 'active') {
      const giveUp = document.createElement('button');
      giveUp.className = 'task-abort';
      giveUp.textContent = 'give up';
      giveUp.addEventListener('click', () => onAbort(task.id));
      item.appendChild(giveUp);
    }
    list.appendChild(item);
  }
  container.appendChild(list);
}
