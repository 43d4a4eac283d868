"""Output formatters for command results written to stdout or ``--output-file``."""

import json
import sys

import yaml


class OutputConfig:
    """Configuration for output formatting."""

    def __init__(
        self, output_format: str, quiet: bool, verbose: bool, output_file: str | None
    ):
        self.output_format = output_format
        self.quiet = quiet
        self.verbose = verbose
        self.output_file = output_file


def as_data(item):
    """Plain JSON-compatible data from pydantic models, dicts and lists."""
    if hasattr(item, "model_dump"):
        return item.model_dump(mode="json", exclude_none=True)
    if isinstance(item, dict):
        return {str(k): as_data(v) for k, v in item.items()}
    if isinstance(item, (list, tuple)):
        return [as_data(v) for v in item]
    if hasattr(item, "item"):
        # numpy scalars
        return item.item()
    return item


class BaseOutputFormatter:
    """Base class for output formatters."""

    def __init__(self, config: OutputConfig):
        self.config = config
        self.output_stream = None
        if config.output_file:
            self.output_stream = open(config.output_file, "w")

    def __del__(self):
        if self.output_stream:
            self.output_stream.close()

    def write(self, content: str):
        """Write content to appropriate stream."""
        if not content.endswith("\n"):
            content += "\n"
        if self.output_stream:
            self.output_stream.write(content)
            self.output_stream.flush()
        else:
            print(content, end="")

    def format_result(self, result, title: str = "Result") -> str:
        """Format a single result object."""
        raise NotImplementedError

    def format_list(self, items: list, title: str, columns: list[str]) -> str:
        """Format a list of records."""
        raise NotImplementedError

    def format_error(self, error: str):
        """Format an error message."""
        if not self.config.quiet:
            print(f"Error: {error}", file=sys.stderr)


class JsonOutputFormatter(BaseOutputFormatter):
    """JSON output formatter."""

    indent: int | None = None

    def format_result(self, result, title: str = "Result") -> str:
        if not result:
            return "{}"
        return json.dumps(as_data(result), indent=self.indent)

    def format_list(self, items: list, title: str, columns: list[str]) -> str:
        if not items:
            return "[]"
        return json.dumps(as_data(items), indent=self.indent)


class PrettyOutputFormatter(JsonOutputFormatter):
    """Pretty JSON output formatter."""

    indent = 2


class TableOutputFormatter(BaseOutputFormatter):
    """Plain-text table output formatter."""

    def format_result(self, result, title: str = "Result") -> str:
        if not result:
            return "No result"

        lines = []
        for key, value in as_data(result).items():
            if isinstance(value, (dict, list)):
                value = json.dumps(value)
            lines.append(f"{key}: {value}")
        return "\n".join(lines)

    def format_list(self, items: list, title: str, columns: list[str]) -> str:
        if not items:
            return f"No {title.lower()} available"

        col_widths = {col: len(col) for col in columns}
        all_rows = []
        for item in as_data(items):
            row = {}
            for col in columns:
                value = item.get(col, "")
                if isinstance(value, float):
                    value = f"{value:.6g}"
                elif isinstance(value, (dict, list)):
                    value = json.dumps(value)
                elif value is None:
                    value = ""
                row[col] = str(value)
                col_widths[col] = max(col_widths[col], len(row[col]))
            all_rows.append(row)

        header = " | ".join(col.ljust(col_widths[col]) for col in columns)
        lines = [header, "-" * len(header)]
        for row in all_rows:
            lines.append(" | ".join(row[col].ljust(col_widths[col]) for col in columns))
        return "\n".join(lines)


class YamlOutputFormatter(BaseOutputFormatter):
    """YAML output formatter."""

    def format_result(self, result, title: str = "Result") -> str:
        if not result:
            return "null"
        return yaml.safe_dump(as_data(result), default_flow_style=False, sort_keys=False)

    def format_list(self, items: list, title: str, columns: list[str]) -> str:
        if not items:
            return "[]"
        return yaml.safe_dump(as_data(items), default_flow_style=False, sort_keys=False)


def get_output_formatter(config: OutputConfig) -> BaseOutputFormatter:
    """Get the appropriate output formatter based on config."""
    formatters = {
        "json": JsonOutputFormatter,
        "pretty": PrettyOutputFormatter,
        "table": TableOutputFormatter,
        "yaml": YamlOutputFormatter,
    }
    return formatters.get(config.output_format, JsonOutputFormatter)(config)
