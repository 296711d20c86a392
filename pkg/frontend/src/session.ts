/** Hint-authoring session: one draft, its previews, and the
 *  preview-before-bind guardrail. */

import { ApiClient } from './api.js';
import { PreviewResult } from './types.js';

export class GuardrailError extends Error {}

export interface SessionOptions {
  /** Require at least one preview before binding (default on). */
  requirePreview?: boolean;
  /** How many hint-conditioned actions to sample per preview. */
  samplesPerPreview?: number;
}

export class HintSession {
  private draftId: string | null = null;
  private text = '';
  private previewCount = 0;
  private lastPreview: PreviewResult | null = null;
  private readonly requirePreview: boolean;
  private readonly m: number;

  constructor(
    private readonly api: ApiClient,
    private readonly filterId: string,
    options: SessionOptions = {},
  ) {
    this.requirePreview = options.requirePreview ?? true;
    this.m = options.samplesPerPreview ?? 3;
  }

  get currentDraftId(): string | null {
    return this.draftId;
  }

  get currentText(): string {
    return this.text;
  }

  get previews(): number {
    return this.previewCount;
  }

  get latestPreview(): PreviewResult | null {
    return this.lastPreview;
  }

  async setText(text: string): Promise<void> {
    if (this.draftId === null) {
      this.draftId = await this.api.createDraft(text, this.filterId);
    } else if (text !== this.text) {
      await this.api.editDraft(this.draftId, text, this.filterId);
      // edited text has not been previewed yet
      this.previewCount = 0;
      this.lastPreview = null;
    }
    this.text = text;
  }

  async preview(trajectoryId: string, stepIndex: number, model: string): Promise<PreviewResult> {
    if (this.draftId === null) {
      throw new GuardrailError('no draft text set');
    }
    const result = await this.api.preview(trajectoryId, stepIndex, this.text, model, this.m);
    this.previewCount += 1;
    this.lastPreview = result;
    return result;
  }

  canBind(): boolean {
    return this.draftId !== null && (!this.requirePreview || this.previewCount > 0);
  }

  /** Why binding is blocked right now, or null if it is allowed. */
  bindBlockReason(): string | null {
    if (this.draftId === null) {
      return 'write a draft hint first';
    }
    if (this.requirePreview && this.previewCount === 0) {
      return 'preview the hint on the flagged state before binding';
    }
    return null;
  }

  async bind(roundIndex: number): Promise<string> {
    const reason = this.bindBlockReason();
    if (reason !== null) {
      throw new GuardrailError(reason);
    }
    return this.api.bindHint(this.draftId as string, this.filterId, roundIndex);
  }
}
