"""Exposes pytest's capture manager so the acceptance tests can print their
per-criterion PASS/FAIL lines to the real terminal (fd-level capture would
otherwise swallow them for passing tests)."""

import contextlib

_CAPTURE_MANAGER = None


def pytest_configure(config):
    global _CAPTURE_MANAGER
    _CAPTURE_MANAGER = config.pluginmanager.getplugin("capturemanager")


def capture_disabled():
    if _CAPTURE_MANAGER is None:
        return contextlib.nullcontext()
    return _CAPTURE_MANAGER.global_and_fixture_disabled()
