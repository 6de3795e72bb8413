import { describe, expect, it } from 'vitest';

import { TileMap } from '../src/map.js';
import type { RoomDoc } from '../src/protocol.js';

const ROOMS: RoomDoc[] = [
  {
    id: 'living_room',
    bounds: { x: 0, y: 0, width: 6, height: 5 },
    doors: [{ to: 'kitchen', position: { x: 5, y: 2 } }],
  },
  {
    id: 'kitchen',
    bounds: { x: 6, y: 0, width: 4, height: 5 },
    doors: [{ to: 'living_room', position: { x: 6, y: 2 } }],
  },
];

describe('tile map navigation', () => {
  const map = new TileMap(ROOMS);

  it('moves freely inside a room', () => {
    const result = map.navigate({ roomId: 'living_room', x: 2, y: 2 }, 'up');
    expect(result).toEqual({ pos: { roomId: 'living_room', x: 2, y: 1 }, moved: true });
  });

  it('is blocked by walls', () => {
    const result = map.navigate({ roomId: 'living_room', x: 0, y: 0 }, 'left');
    expect(result.moved).toBe(false);
    expect(result.pos).toEqual({ roomId: 'living_room', x: 0, y: 0 });
  });

  it('crosses into the connected room from a door tile', () => {
    const result = map.navigate({ roomId: 'living_room', x: 5, y: 2 }, 'right');
    expect(result.moved).toBe(true);
    expect(result.enteredRoom).toBe('kitchen');
    expect(result.pos).toEqual({ roomId: 'kitchen', x: 6, y: 2 });
  });

  it('does not cross walls away from doors', () => {
    const result = map.navigate({ roomId: 'living_room', x: 5, y: 4 }, 'right');
    expect(result.moved).toBe(false);
  });

  it('returns through the reciprocal door', () => {
    const result = map.navigate({ roomId: 'kitchen', x: 6, y: 2 }, 'left');
    expect(result.enteredRoom).toBe('living_room');
    expect(result.pos.roomId).toBe('living_room');
  });

  it('starts the avatar at the first room center', () => {
    expect(map.startPosition()).toEqual({ roomId: 'living_room', x: 3, y: 2 });
  });
});
