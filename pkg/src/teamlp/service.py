"""HTTP front end: one POST route per CLI subcommand, same payloads as ``teamlp.api``.

Run with ``uvicorn teamlp.service:app`` or ``teamlp serve``.
"""
from fastapi import FastAPI

from . import __version__, api

app = FastAPI(title="teamlp", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__, "engines": list(api.ENGINES)}


def _route(command: str, model):
    def endpoint(req: model) -> dict:  # type: ignore[valid-type]
        return api.dispatch(command, req).dump()

    endpoint.__name__ = command.replace("-", "_")
    app.post(f"/{command}")(endpoint)


for _command, (_model, _) in api.HANDLERS.items():
    _route(_command, _model)
