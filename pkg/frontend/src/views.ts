/** HTML renderers. Pure functions from service payloads to markup strings;
 *  the app shell swaps them into the page and wires event handlers. */

import {
  Finding,
  PreviewResult,
  RoundManifest,
  StepDetail,
  TrajectoryDetail,
  TrajectorySummary,
} from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Minimal syntax highlighting for the action language. */
export function highlightAction(code: string): string {
  const escaped = escapeHtml(code);
  return escaped
    .replace(/\b(print|len|min|max|sum|abs|round|split|join|to_number|to_numbers|contains|unique|sort|complete_task)\b/g,
      '<span class="kw">$1</span>')
    .replace(/(&quot;[^&]*?&quot;|'[^']*?')/g, '<span class="str">$1</span>');
}

// -- dashboard ----------------------------------------------------------

/** The manifest log is append-only (tag registration supersedes); keep the
 *  last entry per round. */
export function latestByRound(manifests: RoundManifest[]): RoundManifest[] {
  const byRound = new Map<number, RoundManifest>();
  for (const m of manifests) {
    byRound.set(m.round_index, m);
  }
  return [...byRound.values()].sort((a, b) => a.round_index - b.round_index);
}

export function renderDashboard(allManifests: RoundManifest[]): string {
  const manifests = latestByRound(allManifests);
  if (manifests.length === 0) {
    return '<section class="dashboard"><p>No rounds yet.</p></section>';
  }
  const rows = manifests
    .map((m) => {
      const counts = m.counts;
      const status = m.model_tag_out === null
        ? '<em>awaiting trainer</em>'
        : escapeHtml(m.model_tag_out);
      return `<tr>
        <td><a href="#/trajectories/round/r${m.round_index}-">round ${m.round_index}</a></td>
        <td>${counts['trajectories'] ?? 0}</td>
        <td>${counts['flagged_states'] ?? 0}</td>
        <td>${m.hint_ids.length}</td>
        <td>${counts['samples'] ?? 0}</td>
        <td>${status}</td>
      </tr>`;
    })
    .join('\n');
  return `<section class="dashboard">
    <table>
      <thead><tr><th>round</th><th>sampled</th><th>flagged</th><th>hints</th>
        <th>samples</th><th>model out</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </section>`;
}

// -- trajectory browser -------------------------------------------------

export function renderTrajectoryList(items: TrajectorySummary[]): string {
  const rows = items
    .map((t) => `<tr class="${t.success ? 'ok' : 'failed'}">
      <td><a href="#/trajectories/${encodeURIComponent(t.trajectory_id)}">${escapeHtml(t.trajectory_id)}</a></td>
      <td>${escapeHtml(t.task_id)}</td>
      <td>${escapeHtml(t.model_tag)}</td>
      <td>${escapeHtml(t.outcome)}</td>
      <td>${t.steps}</td>
    </tr>`)
    .join('\n');
  return `<section class="trajectories"><table>
    <thead><tr><th>trajectory</th><th>task</th><th>model</th><th>outcome</th><th>steps</th></tr></thead>
    <tbody>${rows}</tbody></table></section>`;
}

function renderStepCard(step: StepDetail, highlightStep: number | null): string {
  const flagged = step.finding !== null;
  const classes = ['step'];
  if (flagged) {
    classes.push('flagged');
  }
  if (highlightStep === step.index) {
    classes.push('highlight');
  }
  const badge = flagged
    ? `<div class="finding-badge">
        <strong>${escapeHtml(step.finding!.filter_id)}</strong>
        <span class="reasoning">${escapeHtml(step.finding!.verdict_reasoning)}</span>
        <a class="author-hint" href="${hintEditorLink(step.finding!)}">author hint</a>
      </div>`
    : '';
  return `<article class="${classes.join(' ')}" id="step-${step.index}">
    <header>step ${step.index}
      <span class="tokens">${step.input_tokens} in / ${step.output_tokens} out</span>
    </header>
    ${badge}
    <p class="monologue">${escapeHtml(step.monologue)}</p>
    <pre class="code">${highlightAction(step.code)}</pre>
    <pre class="observation">${escapeHtml(step.observation)}</pre>
  </article>`;
}

export function hintEditorLink(finding: Finding): string {
  return [
    '#/hints',
    encodeURIComponent(finding.filter_id),
    encodeURIComponent(finding.state.trajectory_id),
    String(finding.state.step_index),
  ].join('/');
}

export function renderTrajectory(detail: TrajectoryDetail, highlightStep: number | null): string {
  const tokens = detail.steps.reduce(
    (acc, s) => [acc[0] + s.input_tokens, acc[1] + s.output_tokens],
    [0, 0],
  );
  const cards = detail.steps.map((s) => renderStepCard(s, highlightStep)).join('\n');
  return `<section class="trajectory">
    <header>
      <h2>${escapeHtml(detail.trajectory_id)}</h2>
      <dl>
        <dt>task</dt><dd>${escapeHtml(detail.task_id)}</dd>
        <dt>model</dt><dd>${escapeHtml(detail.model_tag)}</dd>
        <dt>outcome</dt><dd>${escapeHtml(detail.outcome.kind)}</dd>
        <dt>success</dt><dd>${detail.success === null ? 'n/a' : String(detail.success)}</dd>
        <dt>tokens</dt><dd>${tokens[0]} in / ${tokens[1]} out</dd>
      </dl>
    </header>
    ${cards}
  </section>`;
}

// -- finding queue ------------------------------------------------------

/** Order findings by filter id then by trajectory id so queue order is
 *  stable and grouped the way coaches triage. */
export function orderFindings(findings: Finding[]): Finding[] {
  return [...findings].sort((a, b) =>
    a.filter_id.localeCompare(b.filter_id)
    || a.state.trajectory_id.localeCompare(b.state.trajectory_id)
    || a.state.step_index - b.state.step_index);
}

export function renderFindingQueue(findings: Finding[]): string {
  if (findings.length === 0) {
    return '<section class="findings"><p>No findings. Run the filters first.</p></section>';
  }
  const rows = orderFindings(findings)
    .map((f) => `<tr>
      <td>${escapeHtml(f.filter_id)}</td>
      <td><a href="#/trajectories/${encodeURIComponent(f.state.trajectory_id)}/steps/${f.state.step_index}">
        ${escapeHtml(f.state.trajectory_id)} · step ${f.state.step_index}</a></td>
      <td>${escapeHtml(f.verdict_reasoning)}</td>
      <td><a href="${hintEditorLink(f)}">author hint</a></td>
    </tr>`)
    .join('\n');
  return `<section class="findings"><table>
    <thead><tr><th>filter</th><th>state</th><th>reasoning</th><th></th></tr></thead>
    <tbody>${rows}</tbody></table></section>`;
}

// -- hint editor --------------------------------------------------------

export function renderPreview(result: PreviewResult): string {
  const samples = result.samples
    .map((s, i) => `<article class="preview-sample">
      <header>sample ${i + 1}</header>
      <p>${escapeHtml(s.monologue)}</p>
      <pre class="code">${highlightAction(s.code)}</pre>
      <pre class="diff">${escapeHtml(s.diff)}</pre>
    </article>`)
    .join('\n');
  return `<div class="preview">
    <article class="original">
      <header>original (mistaken) action</header>
      <p>${escapeHtml(result.original.monologue)}</p>
      <pre class="code">${highlightAction(result.original.code)}</pre>
    </article>
    ${samples}
  </div>`;
}

export function renderHintEditor(
  filterId: string,
  draftText: string,
  previews: number,
  bindBlockReason: string | null,
  preview: PreviewResult | null,
): string {
  const guardrail = bindBlockReason === null
    ? '<button class="bind" data-action="bind">bind hint</button>'
    : `<button class="bind" disabled>bind hint</button>
       <p class="guardrail">${escapeHtml(bindBlockReason)}</p>`;
  return `<section class="hint-editor">
    <h2>corrective hint for <code>${escapeHtml(filterId)}</code></h2>
    <textarea data-field="text">${escapeHtml(draftText)}</textarea>
    <p class="previews">${previews} preview${previews === 1 ? '' : 's'} run</p>
    <button data-action="preview">preview on flagged state</button>
    ${guardrail}
    ${preview === null ? '' : renderPreview(preview)}
  </section>`;
}

export function renderError(message: string): string {
  return `<div class="error">${escapeHtml(message)}
    <button data-action="retry">retry</button></div>`;
}
