from .config import SimConfig, dump_config, load_config, parse_config
from .engine import COMPRESSED, STANDARD, FormatMetrics, SimMetrics, list_sizes, run
from .fragment import Reassembler, fragment, packet_count, parse_packet
from .sweep import CSV_COLUMNS, metrics_rows, sweep

__all__ = [
    "SimConfig", "load_config", "parse_config", "dump_config", "run", "list_sizes", "SimMetrics",
    "FormatMetrics", "STANDARD", "COMPRESSED", "fragment", "parse_packet", "packet_count",
    "Reassembler", "sweep", "metrics_rows", "CSV_COLUMNS",
]
