"""Directional Fourier spectra of classifier logits and training-curve analysis."""

from ._specbias import (
    CsvError,
    DumpError,
    __version__,
    aggregate_spectrum,
    averaged_spectrum_pcc,
    detect_extrema,
    detect_second_descent,
    dft,
    dft_power,
    energy_ratio,
    inject_label_noise,
    line_spectrum,
    mean_filter,
    perturbed_rate_peak,
    ray_grid,
    read_dump,
    run_toy,
    short_time_pcc,
    spectrum_from_dump,
    write_dump,
)

__all__ = [
    "CsvError",
    "DumpError",
    "__version__",
    "aggregate_spectrum",
    "averaged_spectrum_pcc",
    "detect_extrema",
    "detect_second_descent",
    "dft",
    "dft_power",
    "energy_ratio",
    "inject_label_noise",
    "line_spectrum",
    "mean_filter",
    "perturbed_rate_peak",
    "ray_grid",
    "read_dump",
    "run_toy",
    "short_time_pcc",
    "spectrum_from_dump",
    "write_dump",
]
