/** Browser shell: resolves the current hash route, fetches what the view
 *  needs from the service, and swaps the rendered markup into #app. */

import { ApiClient, ApiError } from './api.js';
import { parseRoute, Route } from './router.js';
import { HintSession } from './session.js';
import {
  renderDashboard,
  renderError,
  renderFindingQueue,
  renderHintEditor,
  renderTrajectory,
  renderTrajectoryList,
} from './views.js';

export interface AppConfig {
  baseUrl: string;
  author: string;
  model: string;
  requirePreview?: boolean;
}

export class App {
  private readonly api: ApiClient;
  private session: HintSession | null = null;
  private sessionFilter: string | null = null;

  constructor(
    private readonly config: AppConfig,
    private readonly root: HTMLElement,
  ) {
    this.api = new ApiClient(config.baseUrl, config.author);
  }

  start(): void {
    window.addEventListener('hashchange', () => void this.render());
    void this.render();
  }

  async render(): Promise<void> {
    const route = parseRoute(window.location.hash);
    try {
      this.root.innerHTML = await this.renderRoute(route);
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.root.innerHTML = renderError(message);
      this.root.querySelector('[data-action="retry"]')
        ?.addEventListener('click', () => void this.render());
      return;
    }
    this.wireActions(route);
  }

  private async renderRoute(route: Route): Promise<string> {
    switch (route.view) {
      case 'dashboard':
        return renderDashboard(await this.api.rounds());
      case 'trajectories':
        return renderTrajectoryList(
          await this.api.trajectories(route.roundPrefix ?? undefined),
        );
      case 'trajectory':
        return renderTrajectory(
          await this.api.trajectory(route.trajectoryId), route.stepIndex,
        );
      case 'findings':
        return renderFindingQueue(await this.api.findings(route.roundIndex ?? undefined));
      case 'hint-editor': {
        const session = this.sessionFor(route.filterId);
        return renderHintEditor(
          route.filterId,
          session.currentText,
          session.previews,
          session.bindBlockReason(),
          session.latestPreview,
        );
      }
    }
  }

  sessionFor(filterId: string): HintSession {
    if (this.session === null || this.sessionFilter !== filterId) {
      this.session = new HintSession(this.api, filterId, {
        requirePreview: this.config.requirePreview ?? true,
      });
      this.sessionFilter = filterId;
    }
    return this.session;
  }

  private wireActions(route: Route): void {
    if (route.view !== 'hint-editor') {
      return;
    }
    const session = this.sessionFor(route.filterId);
    const text = this.root.querySelector<HTMLTextAreaElement>('[data-field="text"]');
    this.root.querySelector('[data-action="preview"]')?.addEventListener('click', () => {
      void (async () => {
        await session.setText(text?.value ?? '');
        await session.preview(route.trajectoryId, route.stepIndex, this.config.model);
        await this.render();
      })();
    });
    this.root.querySelector('[data-action="bind"]')?.addEventListener('click', () => {
      void (async () => {
        const manifests = await this.api.rounds();
        const nextRound = Math.max(0, ...manifests.map((m) => m.round_index)) + 1;
        await session.bind(nextRound);
        window.location.hash = '#/dashboard';
      })();
    });
  }
}

export function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const app = new App(
    {
      baseUrl: params.get('service') ?? '',
      author: params.get('author') ?? 'coach',
      model: params.get('model') ?? 'teacher',
    },
    document.getElementById('app') as HTMLElement,
  );
  app.start();
}
