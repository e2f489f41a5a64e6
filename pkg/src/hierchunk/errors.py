class HierchunkError(Exception):
    pass


class LayoutError(HierchunkError, ValueError):
    """Raised for malformed or invalid layout documents."""

    def __init__(self, message: str, *, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class AssignmentError(HierchunkError, ValueError):
    pass


class CycleError(AssignmentError):
    def __init__(self, cycle: list[str]):
        super().__init__("cycle in hierarchy assignment: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class FormatVersionError(HierchunkError, ValueError):
    pass


class EvidenceError(HierchunkError, ValueError):
    pass
