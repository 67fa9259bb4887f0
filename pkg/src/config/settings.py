import os
from pathlib import Path

PACKAGE_ROOT = Path(__file__).resolve().parent.parent


class Settings:
    """Application configuration settings"""

    # Reproducibility
    SEED: int = int(os.getenv("DIALOOP_SEED", "0"))
    THREADS: int = int(os.getenv("DIALOOP_THREADS", "1"))

    # Shipped data
    WORLD_PATH: Path = Path(os.getenv("DIALOOP_WORLD_PATH", str(PACKAGE_ROOT / "data" / "world.json")))
    TEMPLATES_PATH: Path = Path(os.getenv("DIALOOP_TEMPLATES_PATH", str(PACKAGE_ROOT / "data" / "templates.json")))

    # Output
    RUNS_DIR: Path = Path(os.getenv("DIALOOP_RUNS_DIR", "runs"))

    # Logging
    LOG_LEVEL: str = os.getenv("DIALOOP_LOG_LEVEL", "INFO").upper()
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # User simulator
    SEMANTIC_ABUS: bool = os.getenv("DIALOOP_SEMANTIC_ABUS", "false").lower() == "true"
    MAX_POPS: int = int(os.getenv("DIALOOP_MAX_POPS", "3"))
    MAX_GOAL_CHANGES: int = int(os.getenv("DIALOOP_MAX_GOAL_CHANGES", "2"))

    # Structural vocabulary
    SPECIAL_TOKENS = ["<pad>", "<unk>"]
    SEGMENT_TOKENS = [
        "<sos_b>", "<eos_b>", "<sos_a>", "<eos_a>", "<sos_r>", "<eos_r>",
        "<sos_u>", "<eos_u>", "<sos_g>", "<eos_g>", "<sos_db>", "<eos_db>",
    ]
    DB_TOKENS = ["[db_0]", "[db_1]", "[db_few]", "[db_many]"]

    # Choice phrases used when lexicalizing [value_choice]
    CHOICE_PHRASES = {"few": "a few", "many": "many", "1": "one", "0": "no"}
    UNKNOWN_VALUE: str = "unknown"

    def ensure_runs_dir(self) -> Path:
        self.RUNS_DIR.mkdir(parents=True, exist_ok=True)
        return self.RUNS_DIR


# Global settings instance
settings = Settings()
