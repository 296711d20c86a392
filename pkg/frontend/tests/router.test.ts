import { describe, expect, it } from 'vitest';

import { parseRoute, Route, routeToHash } from '../src/router.js';

describe('router', () => {
  it('defaults to the dashboard', () => {
    expect(parseRoute('')).toEqual({ view: 'dashboard' });
    expect(parseRoute('#/')).toEqual({ view: 'dashboard' });
    expect(parseRoute('#/unknown/route')).toEqual({ view: 'dashboard' });
  });

  it('gives every trajectory and step a stable deep link', () => {
    const route: Route = { view: 'trajectory', trajectoryId: 'r2-hf-t-0', stepIndex: 3 };
    const hash = routeToHash(route);
    expect(hash).toBe('#/trajectories/r2-hf-t-0/steps/3');
    expect(parseRoute(hash)).toEqual(route);
  });

  it('round-trips every route shape', () => {
    const routes: Route[] = [
      { view: 'dashboard' },
      { view: 'trajectories', roundPrefix: null },
      { view: 'trajectories', roundPrefix: 'r2-hf-' },
      { view: 'trajectory', trajectoryId: 'r1-abc-0', stepIndex: null },
      { view: 'findings', roundIndex: null },
      { view: 'findings', roundIndex: 2 },
      { view: 'hint-editor', filterId: 'unknown-tool', trajectoryId: 'r2-hf-t-0', stepIndex: 1 },
    ];
    for (const route of routes) {
      expect(parseRoute(routeToHash(route))).toEqual(route);
    }
  });

  it('escapes ids with special characters', () => {
    const route: Route = { view: 'trajectory', trajectoryId: 'odd/id with space', stepIndex: null };
    expect(parseRoute(routeToHash(route))).toEqual(route);
  });
});
