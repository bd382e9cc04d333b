"""Root of the domain error hierarchy.

Every domain error carries a stable machine-readable ``code`` so the HTTP
layer and the CLI can map failures without string matching.
"""


class AgentError(Exception):
    code = "error"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}
