from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Application
    app_name: str = "hoop-automorphisms"
    app_version: str = "1.0.0"
    environment: str = "development"

    # Logging
    log_level: str = "INFO"
    log_format: str = "console"

    # Geometry
    max_fan_dimension: int = 7

    # Unit-fixing report
    report_sample_size: int = 200
    report_max_denominator: int = 64
    default_seed: int = 0

    # Dynamics
    orbit_steps: int = 1_000_000
    burn_in: int = 1000
    histogram_bins: int = 50
    drift_tolerance: float = 1e-12
    dirac_mass_threshold: float = 0.99
    closed_form_samples: int = 100

    # Spectrum enumeration
    spectrum_max_bound: int = 200

    # Plotting
    plot_samples: int = 512
    plot_width_inches: float = 4.0
    plot_height_inches: float = 4.0
    plot_dpi: int = 100

    class Config:
        env_file = ".env"
        case_sensitive = False


settings = Settings()
