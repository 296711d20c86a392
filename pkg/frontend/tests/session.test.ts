import { describe, expect, it } from 'vitest';

import { ApiClient, FetchLike } from '../src/api.js';
import { GuardrailError, HintSession } from '../src/session.js';

function fakeService(): { fetchFn: FetchLike; posts: string[] } {
  const posts: string[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? 'GET';
    if (method !== 'GET') {
      posts.push(url);
    }
    let payload: unknown = {};
    if (url.endsWith('/api/hints/draft')) {
      payload = { draft_id: 'draft-0001' };
    } else if (url.endsWith('/api/preview')) {
      payload = { original: { monologue: 'm', code: 'bad()' }, samples: [] };
    } else if (url.endsWith('/api/hints/bind')) {
      payload = { hint_id: 'corr-0007' };
    }
    return new Response(JSON.stringify(payload), { status: 200 });
  };
  return { fetchFn, posts };
}

function session(requirePreview = true) {
  const { fetchFn, posts } = fakeService();
  const api = new ApiClient('http://svc', 'ana', fetchFn);
  return { session: new HintSession(api, 'unknown-tool', { requirePreview }), posts };
}

describe('HintSession guardrail', () => {
  it('blocks binding before any preview, with an explanation', async () => {
    const { session: s } = session();
    await s.setText('use only documented tools');
    expect(s.canBind()).toBe(false);
    expect(s.bindBlockReason()).toMatch(/preview/);
    await expect(s.bind(2)).rejects.toThrowError(GuardrailError);
  });

  it('allows binding after one preview', async () => {
    const { session: s, posts } = session();
    await s.setText('use only documented tools');
    await s.preview('r2-hf-t-0', 1, 'teacher');
    expect(s.canBind()).toBe(true);
    expect(s.bindBlockReason()).toBeNull();
    expect(await s.bind(2)).toBe('corr-0007');
    expect(posts.filter((u) => u.endsWith('/api/hints/bind'))).toHaveLength(1);
  });

  it('re-requires a preview after the draft text changes', async () => {
    const { session: s } = session();
    await s.setText('v1');
    await s.preview('r2-hf-t-0', 1, 'teacher');
    expect(s.canBind()).toBe(true);
    await s.setText('v2 (edited)');
    expect(s.previews).toBe(0);
    expect(s.canBind()).toBe(false);
  });

  it('guardrail can be configured off', async () => {
    const { session: s } = session(false);
    await s.setText('v1');
    expect(s.canBind()).toBe(true);
  });

  it('refuses to preview with no draft text', async () => {
    const { session: s } = session();
    await expect(s.preview('t', 1, 'teacher')).rejects.toThrowError(GuardrailError);
  });
});
