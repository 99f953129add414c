from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
	# Reproducibility
	SEED: int = 0  # overridden by --seed
	THREADS: int = 1

	# Output
	OUT_DIR: str = "./out"
	PRECISION: int = 12  # significant digits for printed distributions

	# Power iteration
	POWER_TOL: float = 1e-13
	POWER_MAX_ITER: int = 1_000_000
	# Budget inside experiment trials before falling back to the direct solver
	EXPERIMENT_POWER_MAX_ITER: int = 20_000

	# Direct solver
	DIRECT_RESIDUAL_TOL: float = 1e-10

	# Non-primitive redraws allowed per trial
	MAX_REDRAWS: int = 100

	# Dense matrices are never allocated past this share of available memory
	MEMORY_THRESHOLD_MB: int = 4000
	MAX_N: int = 8192

	LOG_LEVEL: str = "INFO"

	# Pydantic v2 settings configuration
	model_config = SettingsConfigDict(
		env_prefix="MARKOVLAB_",
		env_file=".env",
		extra="ignore",
	)

settings = Settings()
