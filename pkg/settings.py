import os

from dotenv import load_dotenv, find_dotenv

load_dotenv(find_dotenv())


def _int(value, default: int) -> int:
    try:
        return int(value) if value is not None else default
    except Exception:
        return default


def _float(value, default: float) -> float:
    try:
        return float(value) if value is not None else default
    except Exception:
        return default


class Settings:
    class Env:
        LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")

        GOSSIP_TTL = os.environ.get("PEERNET_GOSSIP_TTL")
        READVERTISE_SECONDS = os.environ.get("PEERNET_READVERTISE_SECONDS")
        CLIENT_TIMEOUT = os.environ.get("PEERNET_CLIENT_TIMEOUT")
        SIM_TIMEOUT_TICKS = os.environ.get("PEERNET_SIM_TIMEOUT_TICKS")
        SIM_LATENCY = os.environ.get("PEERNET_SIM_LATENCY")
        MAX_PLAN_LEN = os.environ.get("PEERNET_MAX_PLAN_LEN")
        WORKER_THREADS = os.environ.get("PEERNET_WORKER_THREADS")

    env = Env
    log_level = env.LOG_LEVEL.upper()

    # Flooding hop budget; exceeds the diameter of any desk-scale topology
    GOSSIP_TTL = _int(env.GOSSIP_TTL, 8)
    READVERTISE_SECONDS = _float(env.READVERTISE_SECONDS, 30.0)

    CLIENT_TIMEOUT = _float(env.CLIENT_TIMEOUT, 5.0)
    SIM_TIMEOUT_TICKS = _int(env.SIM_TIMEOUT_TICKS, 1000)
    SIM_LATENCY = _int(env.SIM_LATENCY, 1)

    MAX_PLAN_LEN = _int(env.MAX_PLAN_LEN, 5)

    # Pool used for one-way gossip sends on the TCP backend
    WORKER_THREADS = _int(env.WORKER_THREADS, 16)


settings = Settings()
