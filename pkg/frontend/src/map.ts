// Top-down tile map: room geometry queries and avatar movement.
//
// Movement is a pure function over the scenario geometry; walls stop the
// avatar, stepping off a door tile crosses into the connected room. Room
// transitions are reported so the app can emit enter_room telemetry.

import type { RoomDoc } from './protocol.js';

export type Direction = 'up' | 'down' | 'left' | 'right';

export interface AvatarPos {
  roomId: string;
  x: number;
  y: number;
}

export interface MoveResult {
  pos: AvatarPos;
  moved: boolean;
  enteredRoom?: string;
}

const DELTAS: Record<Direction, { dx: number; dy: number }> = {
  up: { dx: 0, dy: -1 },
  down: { dx: 0, dy: 1 },
  left: { dx: -1, dy: 0 },
  right: { dx: 1, dy: 0 },
};

export class TileMap {
  private rooms = new Map<string, RoomDoc>();

  constructor(rooms: RoomDoc[]) {
    for (const room of rooms) this.rooms.set(room.id, room);
  }

  room(roomId: string): RoomDoc {
    const room = this.rooms.get(roomId);
    if (!room) throw new Error(`unknown room '${roomId}'`);
    return room;
  }

  contains(roomId: string, x: number, y: number): boolean {
    const { bounds } = this.room(roomId);
    return x >= bounds.x && x < bounds.x + bounds.width && y >= bounds.y && y < bounds.y + bounds.height;
  }

  doorAt(roomId: string, x: number, y: number): { to: string } | null {
    for (const door of this.room(roomId).doors) {
      if (door.position.x === x && door.position.y === y) return { to: door.to };
    }
    return null;
  }

  startPosition(): AvatarPos {
    const first = [...this.rooms.values()][0];
    return {
      roomId: first.id,
      x: first.bounds.x + Math.floor(first.bounds.width / 2),
      y: first.bounds.y + Math.floor(first.bounds.height / 2),
    };
  }

  navigate(pos: AvatarPos, direction: Direction): MoveResult {
    const { dx, dy } = DELTAS[direction];
    const target = { x: pos.x + dx, y: pos.y + dy };
    if (this.contains(pos.roomId, target.x, target.y)) {
      return { pos: { roomId: pos.roomId, ...target }, moved: true };
    }
    // leaving the room is only possible from a door tile
    const door = this.doorAt(pos.roomId, pos.x, pos.y);
    if (door) {
      const arrival = this.arrivalTile(door.to, pos.roomId, target);
      return { pos: arrival, moved: true, enteredRoom: door.to };
    }
    return { pos, moved: false };
  }

  private arrivalTile(roomId: string, fromRoomId: string, target: { x: number; y: number }): AvatarPos {
    if (this.contains(roomId, target.x, target.y)) {
      return { roomId, x: target.x, y: target.y };
    }
    // no adjacent tile across the wall: arrive at the reciprocal door
    const back = this.room(roomId).doors.find((door) => door.to === fromRoomId);
    if (back) return { roomId, x: back.position.x, y: back.position.y };
    const { bounds } = this.room(roomId);
    return { roomId, x: bounds.x, y: bounds.y };
  }
}
