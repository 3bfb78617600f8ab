from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="TFS3D_", extra="ignore")

    # Default worker count for `eval`; --threads overrides it
    threads: int = 1

    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


settings = Settings()
