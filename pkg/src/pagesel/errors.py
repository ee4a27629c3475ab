class PageselError(Exception):
    pass


class CapacityError(PageselError):
    """A page would hold more words than it has."""


class NotEnoughMemory(CapacityError):
    def __init__(self, func=None):
        self.func = func
        super().__init__("not enough memory" + (f" for function {func!r}" if func else ""))


class NoFeasibleAssignment(CapacityError):
    pass


class InstanceTooLarge(PageselError):
    pass
