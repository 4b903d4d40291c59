def pc_gray(text: str) -> str:
    return f"[gray]{text}[/]"

def pc_magenta(text: str) -> str:
    return f"[magenta]{text}[/]"

def pc_cyan(text: str) -> str:
    return f"[cyan]{text}[/]"

def pc_green(text: str) -> str:
    return f"[green]{text}[/]"

def pc_red(text: str) -> str:
    return f"[red]{text}[/]"


def verdict_markup(verdict: str) -> str:
    return pc_green(verdict) if verdict == "genuine" else pc_red(verdict)


def field_line(name: str, value: object) -> str:
    """`name: value` with the name dimmed, for summary blocks."""

    return f"{pc_gray(name + ':')} {pc_cyan(str(value))}"
