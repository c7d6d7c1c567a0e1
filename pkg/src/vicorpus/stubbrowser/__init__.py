"""A protocol-faithful stand-in for a headless Chromium.

Launches like a browser (``python -m vicorpus.stubbrowser
--remote-debugging-port=N --user-data-dir=D``), writes DevToolsActivePort,
serves the /json discovery endpoints and a CDP WebSocket per page target, and
renders HTML through a small deterministic box-layout model instead of a real
web engine. It exists so the full pipeline (client, pool, writer, validator)
can run end-to-end and reproducibly on machines without a browser binary.

The page model implements the same instrumentation semantics the injected
page script performs in a real browser: per-character spans, the five
unusable-element removal rules, seeded per-paragraph font assignment, and the
report JSON contract.
"""
