/** End-to-end console round-trip against a real service process with a
 *  scripted backend: run the filters, open the flagged trajectory, preview a
 *  draft hint, check the corrected-action diff, bind the hint, then run the
 *  next round and confirm the bound hint lands in its manifest. */

import { ChildProcess, execFile, spawn } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { HintSession } from '../src/session.js';
import { Finding } from '../src/types.js';
import { latestByRound } from '../src/views.js';

const execFileAsync = promisify(execFile);

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const HINT_TEXT =
  'Only call the documented tools; there is no data_fetch tool. '
  + 'Re-read the tool documentation and use the listed call.';

let runDir: string;
let server: ChildProcess;

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/api/health`);
      if (resp.ok) {
        return;
      }
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) {
      throw new Error('service did not come up in time');
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
}

beforeAll(async () => {
  runDir = mkdtempSync(join(tmpdir(), 'coach-e2e-'));
  server = spawn('python3', [
    join(__dirname, '..', 'scripts', 'dev_stack.py'),
    '--dir', runDir, '--port', String(PORT), '--serve',
  ], { stdio: ['ignore', 'pipe', 'pipe'] });
  server.stderr?.on('data', (chunk: Buffer) => {
    process.stderr.write(chunk);
  });
  await waitForHealth(120_000);
}, 150_000);

afterAll(() => {
  server?.kill();
  if (runDir) {
    rmSync(runDir, { recursive: true, force: true });
  }
});

describe('console round-trip', () => {
  const api = new ApiClient(BASE, 'e2e-coach');
  let flagged: Finding;
  let hintId: string;

  it('dashboard shows round 1 awaiting the trainer tag it received', async () => {
    const rounds = latestByRound(await api.rounds());
    expect(rounds).toHaveLength(1);
    expect(rounds[0].round_index).toBe(1);
    expect(rounds[0].model_tag_out).toBe('student-r1');
  }, 30_000);

  it('running the filters flags the scripted mistakes', async () => {
    const findings = await api.runFilters(2);
    expect(findings.length).toBeGreaterThanOrEqual(2);
    expect(findings.every((f) => f.filter_id === 'unknown-tool')).toBe(true);
    flagged = findings[0];
  }, 60_000);

  it('the flagged trajectory highlights the mistaken step', async () => {
    const detail = await api.trajectory(flagged.state.trajectory_id);
    const step = detail.steps[flagged.state.step_index - 1];
    expect(step.finding?.filter_id).toBe('unknown-tool');
    expect(step.code).toContain('data_fetch');
    expect(step.observation).toContain("unknown tool 'data_fetch'");
  }, 30_000);

  it('preview shows the corrected action and its diff; bind is guarded', async () => {
    const session = new HintSession(api, 'unknown-tool');
    await session.setText(HINT_TEXT);
    expect(session.canBind()).toBe(false);
    await expect(session.bind(2)).rejects.toThrow(/preview/);

    const preview = await session.preview(
      flagged.state.trajectory_id, flagged.state.step_index, 'teacher',
    );
    expect(preview.original.code).toContain('data_fetch');
    expect(preview.samples.length).toBeGreaterThan(0);
    for (const sample of preview.samples) {
      expect(sample.code).not.toContain('data_fetch');
      expect(sample.diff).toContain('-data_fetch("all")');
      expect(sample.diff).toContain('+');
    }

    expect(session.canBind()).toBe(true);
    hintId = await session.bind(2);
    expect(hintId).toMatch(/^corr-/);
    const hints = await api.hints();
    const bound = hints.hints.find((h) => h.hint_id === hintId);
    expect(bound?.text).toBe(HINT_TEXT);
    expect(bound?.filter_id).toBe('unknown-tool');
  }, 60_000);

  it('the bound hint appears in the next round\'s manifest', async () => {
    await execFileAsync('agentcoach', [
      'round', 'run', '--config', join(runDir, 'config.json'),
      '--round', '2', '--model', 'teacher', '--rollouts', '1',
    ]);
    const rounds = latestByRound(await api.rounds());
    const round2 = rounds.find((m) => m.round_index === 2);
    expect(round2).toBeDefined();
    expect(round2!.hint_ids).toContain(hintId);
    expect(round2!.counts['flagged_states']).toBeGreaterThanOrEqual(2);
    expect(round2!.counts['corrective_samples']).toBeGreaterThan(0);
  }, 120_000);
});
