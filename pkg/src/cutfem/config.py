"""
Config reader for cutfem

Reads flat `key = value` run files. Keys are the long option names of
`cutfem run` (dashes or underscores); `#` starts a comment.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional


class ConfigError(ValueError):
    """Raised for malformed lines or unknown keys; carries the line number."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


KNOWN_KEYS = {
    'levels', 'beta', 'gamma', 'order', 'depth', 'eps', 'check', 'out',
    'verbose', 'quiet', 'large_threshold', 'tau', 'final_time',
}

TRUE_WORDS = {'true', 'yes', 'on'}
FALSE_WORDS = {'false', 'no', 'off'}


@dataclass
class Entry:
    """One assignment of the file."""
    key: str
    value: Any
    line: int

    def __repr__(self):
        return f"Entry({self.key}={self.value!r}, line {self.line})"


class ConfigReader:
    """Character scanner over the text of a config file."""

    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.entries: List[Entry] = []

    def current_char(self) -> Optional[str]:
        if self.pos >= len(self.source):
            return None
        return self.source[self.pos]

    def advance(self) -> Optional[str]:
        if self.pos >= len(self.source):
            return None
        char = self.source[self.pos]
        self.pos += 1
        if char == '\n':
            self.line += 1
        return char

    def skip_spaces(self):
        while self.current_char() is not None and self.current_char() in ' \t\r':
            self.advance()

    def skip_comment(self):
        while self.current_char() is not None and self.current_char() != '\n':
            self.advance()

    def read_key(self) -> str:
        key = ""
        while self.current_char() is not None and (self.current_char().isalnum() or self.current_char() in '-_'):
            key += self.current_char()
            self.advance()
        if not key:
            raise ConfigError(f"expected a key, found {self.current_char()!r}", self.line)
        return key.replace('-', '_').lower()

    def read_quoted(self) -> str:
        quote = self.advance()
        start = self.line
        text = ""
        while self.current_char() is not None and self.current_char() not in (quote, '\n'):
            text += self.advance()
        if self.current_char() != quote:
            raise ConfigError("unterminated string", start)
        self.advance()
        return text

    def read_raw_value(self) -> str:
        text = ""
        while self.current_char() is not None and self.current_char() not in '#\n':
            text += self.advance()
        return text.strip()

    def end_of_line(self):
        self.skip_spaces()
        if self.current_char() == '#':
            self.skip_comment()
        if self.current_char() not in (None, '\n'):
            raise ConfigError(f"unexpected text {self.current_char()!r} after value", self.line)
        self.advance()

    def read(self) -> List[Entry]:
        """Scan the whole source into entries."""
        self.entries = []
        while self.pos < len(self.source):
            self.skip_spaces()
            char = self.current_char()
            if char is None:
                break
            if char == '\n':
                self.advance()
                continue
            if char == '#':
                self.skip_comment()
                continue

            line = self.line
            key = self.read_key()
            self.skip_spaces()
            if self.current_char() != '=':
                raise ConfigError(f"expected '=' after '{key}'", line)
            self.advance()
            self.skip_spaces()
            if self.current_char() in ('"', "'"):
                value = self.read_quoted()
            else:
                raw = self.read_raw_value()
                if not raw:
                    raise ConfigError(f"missing value for '{key}'", line)
                value = parse_value(raw)
            self.end_of_line()

            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key '{key}'", line)
            self.entries.append(Entry(key, value, line))
        return self.entries


def parse_value(text: str) -> Any:
    """int, float, bool word or plain string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    lowered = text.lower()
    if lowered in TRUE_WORDS:
        return True
    if lowered in FALSE_WORDS:
        return False
    return text


def parse_config(source: str) -> Dict[str, Any]:
    """Later assignments of a key override earlier ones."""
    return {entry.key: entry.value for entry in ConfigReader(source).read()}


def load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r') as f:
            source = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}", 0)
    return parse_config(source)
