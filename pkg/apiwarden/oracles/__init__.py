from apiwarden.oracles.engine import run_security_phase

__all__ = ["run_security_phase"]
