from .frequency import (
    FrequencyResponse,
    GainMargin,
    MarginReport,
    PhaseMargin,
    default_grid,
    frequency_response,
    stability_margins,
)
from .pzmap import Location, Offender, PoleZeroReport, Stability, pole_zero_report
from .tables import MarginRow, bode_table_report, format_margin_table, verdict
from .timedomain import HorizonTooShortError, StepMetrics, TimeSeries, step_metrics, step_response, suggested_horizon
