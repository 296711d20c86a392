"""Registering the trained model tag with the coaching service.

The only coupling to the coaching framework is its REST API: after training,
the new model tag is posted to `/api/rounds/{i}/model-tag`, which unblocks the
round orchestrator's handoff gate.
"""

from __future__ import annotations

import httpx


class RegistryError(RuntimeError):
    pass


def register_model_tag(
    service_url: str,
    round_index: int,
    name: str,
    author: str = "coach-trainer",
    client: httpx.Client | None = None,
) -> dict:
    """POST the tag; returns the updated round manifest as a dict.

    A 409 (tag already registered for the round) and a 404 (no such round)
    are surfaced as RegistryError with the service's message.
    """
    url = f"{service_url.rstrip('/')}/api/rounds/{round_index}/model-tag"
    payload = {"name": name, "author": author}
    owned = client is None
    client = client or httpx.Client()
    try:
        resp = client.post(url, json=payload)
    finally:
        if owned:
            client.close()
    if resp.status_code == 409:
        raise RegistryError(f"duplicate registration: {_detail(resp)}")
    if resp.status_code == 404:
        raise RegistryError(f"unknown round {round_index}: {_detail(resp)}")
    if resp.status_code != 200:
        raise RegistryError(f"service returned {resp.status_code}: {resp.text}")
    return resp.json()


def _detail(resp: httpx.Response) -> str:
    try:
        return resp.json().get("detail", resp.text)
    except ValueError:
        return resp.text
