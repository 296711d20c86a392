/** Hash-based routing so every round, trajectory, step, and finding has a
 *  stable deep link. */

export type Route =
  | { view: 'dashboard' }
  | { view: 'trajectories'; roundPrefix: string | null }
  | { view: 'trajectory'; trajectoryId: string; stepIndex: number | null }
  | { view: 'findings'; roundIndex: number | null }
  | { view: 'hint-editor'; filterId: string; trajectoryId: string; stepIndex: number };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, '').split('/').filter((p) => p.length > 0)
    .map(decodeURIComponent);
  if (parts.length === 0 || parts[0] === 'dashboard') {
    return { view: 'dashboard' };
  }
  if (parts[0] === 'trajectories') {
    if (parts.length === 1) {
      return { view: 'trajectories', roundPrefix: null };
    }
    if (parts[1] === 'round') {
      return { view: 'trajectories', roundPrefix: parts[2] ?? null };
    }
    const stepIndex = parts[2] === 'steps' && parts[3] ? Number(parts[3]) : null;
    return { view: 'trajectory', trajectoryId: parts[1], stepIndex };
  }
  if (parts[0] === 'findings') {
    const roundIndex = parts[1] ? Number(parts[1]) : null;
    return { view: 'findings', roundIndex };
  }
  if (parts[0] === 'hints' && parts.length >= 4) {
    return {
      view: 'hint-editor',
      filterId: parts[1],
      trajectoryId: parts[2],
      stepIndex: Number(parts[3]),
    };
  }
  return { view: 'dashboard' };
}

export function routeToHash(route: Route): string {
  switch (route.view) {
    case 'dashboard':
      return '#/dashboard';
    case 'trajectories':
      return route.roundPrefix === null
        ? '#/trajectories'
        : `#/trajectories/round/${encodeURIComponent(route.roundPrefix)}`;
    case 'trajectory': {
      const base = `#/trajectories/${encodeURIComponent(route.trajectoryId)}`;
      return route.stepIndex === null ? base : `${base}/steps/${route.stepIndex}`;
    }
    case 'findings':
      return route.roundIndex === null ? '#/findings' : `#/findings/${route.roundIndex}`;
    case 'hint-editor':
      return [
        '#/hints',
        encodeURIComponent(route.filterId),
        encodeURIComponent(route.trajectoryId),
        String(route.stepIndex),
      ].join('/');
  }
}
