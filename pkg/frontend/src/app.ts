// Study client bootstrap: resolves the session from the entry URL, fetches
// the scenario, renders the tile map / panels / tasks / explanation feed,
// and routes every participant action through the session socket.

import { TileMap, type AvatarPos, type Direction } from './map.js';
import { buildControlPanel, updatePanelValues } from './panels.js';
import type { DeviceDoc, ScenarioDoc, Snapshot } from './protocol.js';
import { renderFeed } from './explanations.js';
import { renderTaskList } from './tasks.js';
import { SessionApi, parseEntryUrl, type EntryParams } from './session.js';
import { SessionSocket, type WebSocketFactory } from './socket.js';
import { ClientViewModel } from './viewmodel.js';

const TILE = 36; // px per tile

export interface BootOptions {
  fetchImpl?: typeof fetch;
  wsFactory?: WebSocketFactory;
  participantId?: string;
}

export class StudyApp {
  readonly vm = new ClientViewModel();
  map!: TileMap;
  avatar!: AvatarPos;
  scenario!: ScenarioDoc;
  socket!: SessionSocket;
  sessionId!: string;
  openDeviceId: string | null = null;

  private api!: SessionApi;
  private root!: HTMLElement;
  private mapEl!: HTMLElement;
  private panelEl!: HTMLElement;
  private tasksEl!: HTMLElement;
  private feedEl!: HTMLElement;
  private avatarEl!: HTMLElement;

  static async boot(root: HTMLElement, entry: EntryParams, options: BootOptions = {}): Promise<StudyApp> {
    const app = new StudyApp();
    await app.start(root, entry, options);
    return app;
  }

  static bootFromLocation(root: HTMLElement, options: BootOptions = {}): Promise<StudyApp> {
    const entry = parseEntryUrl(window.location.hash);
    if (!entry) throw new Error('missing study entry parameters (#/study?session=...)');
    return StudyApp.boot(root, entry, options);
  }

  private async start(root: HTMLElement, entry: EntryParams, options: BootOptions): Promise<void> {
    this.root = root;
    const base = entry.api ?? window.location.origin;
    this.api = new SessionApi(base, options.fetchImpl);

    // the entry id is either an existing session (resume) or a scenario id
    let snapshot: Snapshot | null = await this.api.getState(entry.id);
    let wsUrl: string;
    if (snapshot) {
      this.sessionId = entry.id;
      wsUrl = `${base.replace(/^http/, 'ws')}/ws/${entry.id}`;
    } else {
      const participant = options.participantId ?? `participant-${Math.random().toString(36).slice(2, 10)}`;
      const created = await this.api.createSession(entry.id, participant, entry.ctx);
      this.sessionId = created.sessionId;
      wsUrl = created.wsUrl;
      snapshot = await this.api.getState(this.sessionId);
    }
    const scenarioId = snapshot?.scenarioId ?? entry.id;
    this.scenario = await this.api.getScenario(scenarioId);
    this.map = new TileMap(this.scenario.rooms);
    this.avatar = this.map.startPosition();

    this.buildLayout();
    this.vm.subscribe((event) => this.onViewEvent(event.kind));
    if (snapshot) this.vm.applySnapshot(snapshot);

    this.socket = new SessionSocket(this.sessionId, wsUrl, options.wsFactory);
    this.socket.onEvent((frame) => this.vm.applyServerEvent(frame));

    this.root.ownerDocument.addEventListener('keydown', (event) => this.onKey(event as KeyboardEvent));
    this.renderAll();
  }

  // -- layout -----------------------------------------------------------------

  private buildLayout(): void {
    this.root.textContent = '';
    this.root.className = 'study-app';

    const title = document.createElement('h2');
    title.textContent = this.scenario.name;
    this.root.appendChild(title);

    const columns = document.createElement('div');
    columns.className = 'columns';
    this.mapEl = document.createElement('div');
    this.mapEl.className = 'tile-map';
    this.panelEl = document.createElement('div');
    this.panelEl.className = 'panel-area';
    const side = document.createElement('div');
    side.className = 'sidebar';
    this.tasksEl = document.createElement('div');
    this.tasksEl.className = 'tasks-area';
    this.feedEl = document.createElement('div');
    this.feedEl.className = 'feed-area';
    side.appendChild(this.tasksEl);
    side.appendChild(this.feedEl);
    columns.appendChild(this.mapEl);
    columns.appendChild(this.panelEl);
    columns.appendChild(side);
    this.root.appendChild(columns);

    const finish = document.createElement('button');
    finish.className = 'finish-study';
    finish.textContent = 'Finish study';
    finish.addEventListener('click', () => void this.api.complete(this.sessionId));
    this.root.appendChild(finish);

    this.buildMap();
  }

  private buildMap(): void {
    this.mapEl.textContent = '';
    this.mapEl.style.position = 'relative';
    for (const room of this.scenario.rooms) {
      const rect = document.createElement('div');
      rect.className = 'room';
      rect.dataset.roomId = room.id;
      rect.style.cssText = [
        'position:absolute',
        `left:${room.bounds.x * TILE}px`,
        `top:${room.bounds.y * TILE}px`,
        `width:${room.bounds.width * TILE}px`,
        `height:${room.bounds.height * TILE}px`,
      ].join(';');
      this.mapEl.appendChild(rect);
      for (const door of room.doors) {
        const marker = document.createElement('div');
        marker.className = 'door';
        marker.style.cssText = `position:absolute;left:${door.position.x * TILE}px;top:${door.position.y * TILE}px;width:${TILE}px;height:${TILE}px`;
        this.mapEl.appendChild(marker);
      }
    }
    for (const device of this.scenario.devices) {
      const icon = document.createElement('button');
      icon.className = `device device-${device.type}`;
      icon.dataset.deviceId = device.id;
      icon.title = device.id;
      icon.textContent = deviceGlyph(device.type);
      icon.style.cssText = `position:absolute;left:${device.position.x * TILE}px;top:${device.position.y * TILE}px;width:${TILE}px;height:${TILE}px`;
      icon.addEventListener('click', () => this.openPanel(device.id));
      this.mapEl.appendChild(icon);
    }
    this.avatarEl = document.createElement('div');
    this.avatarEl.className = 'avatar';
    this.avatarEl.textContent = '🧍';
    this.avatarEl.style.position = 'absolute';
    this.mapEl.appendChild(this.avatarEl);
    this.placeAvatar();
  }

  private placeAvatar(): void {
    this.avatarEl.style.left = `${this.avatar.x * TILE}px`;
    this.avatarEl.style.top = `${this.avatar.y * TILE}px`;
  }

  // -- interaction ------------------------------------------------------------

  onKey(event: KeyboardEvent): void {
    const directions: Record<string, Direction> = {
      ArrowUp: 'up',
      ArrowDown: 'down',
      ArrowLeft: 'left',
      ArrowRight: 'right',
    };
    const direction = directions[event.key];
    if (direction) {
      event.preventDefault();
      this.move(direction);
    }
  }

  move(direction: Direction): boolean {
    const result = this.map.navigate(this.avatar, direction);
    if (!result.moved) return false;
    this.avatar = result.pos;
    this.placeAvatar();
    if (result.enteredRoom) {
      this.socket.telemetry('enter_room', { roomId: result.enteredRoom });
    }
    return true;
  }

  deviceById(deviceId: string): DeviceDoc {
    const device = this.scenario.devices.find((candidate) => candidate.id === deviceId);
    if (!device) throw new Error(`unknown device '${deviceId}'`);
    return device;
  }

  isAdjacent(device: DeviceDoc): boolean {
    return (
      device.roomId === this.avatar.roomId &&
      Math.abs(device.position.x - this.avatar.x) <= 1 &&
      Math.abs(device.position.y - this.avatar.y) <= 1
    );
  }

  openPanel(deviceId: string): boolean {
    const device = this.deviceById(deviceId);
    if (!this.isAdjacent(device)) return false; // walk closer first
    this.openDeviceId = deviceId;
    this.socket.telemetry('panel_opened', { deviceId });
    this.renderPanel();
    return true;
  }

  private renderPanel(): void {
    this.panelEl.textContent = '';
    if (!this.openDeviceId) return;
    const device = this.deviceById(this.openDeviceId);
    const values = this.vm.devices[device.id] ?? {};
    const panel = buildControlPanel(device, values, (property, value) => {
      this.vm.markPending(device.id, property);
      this.socket.interact(device.id, property, value);
    });
    this.panelEl.appendChild(panel);
  }

  // -- view updates -------------------------------------------------------------

  private onViewEvent(kind: string): void {
    if (kind === 'devices-changed') {
      if (this.openDeviceId) {
        const panel = this.panelEl.querySelector<HTMLElement>('.control-panel');
        if (panel) updatePanelValues(panel, this.vm.devices[this.openDeviceId] ?? {});
      }
    } else if (kind === 'tasks-changed') {
      this.renderTasks();
    } else if (kind === 'feed-changed') {
      this.renderFeedArea();
    }
  }

  private renderTasks(): void {
    renderTaskList(this.tasksEl, this.scenario.tasks, this.vm.tasks, (taskId) => this.socket.abortTask(taskId));
  }

  private renderFeedArea(): void {
    renderFeed(this.feedEl, this.vm.feed, {
      onRate: (instanceId, value) => {
        this.socket.rate(instanceId, value);
        this.vm.recordRating(instanceId, value);
      },
      onRequest: () => this.socket.requestExplanation(),
      onQuery: (text, parentInstanceId) => this.socket.query(text, parentInstanceId),
    });
  }

  private renderAll(): void {
    this.renderTasks();
    this.renderFeedArea();
    this.renderPanel();
  }
}

function deviceGlyph(type: string): string {
  const glyphs: Record<string, string> = {
    heater: '♨',
    light: '💡',
    window: '🪟',
    thermostat: '🌡',
  };
  return glyphs[type] ?? '⚙';
}
