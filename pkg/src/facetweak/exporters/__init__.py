from .json_exporter import JSONExporter
from .csv_exporter import CSVExporter
from .report_exporter import ReportExporter, emit_report

__all__ = ["JSONExporter", "CSVExporter", "ReportExporter", "emit_report"]
