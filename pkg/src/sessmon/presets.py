"""Scenario presets for the corpus: correct and faulty runs over udp, reliable tcp and lossy tcp.

Each protocol has a fixed session mix with pinned branch picks so that message counts are
exact, and one canonical fault: a role that sends off-protocol messages at a fixed point.
`BASELINES` holds the accepted/rejected counts the presets are calibrated against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .sim import Conformant, Injection, LinkFaults, Scenario, SessionGroup

TRANSPORTS = ("udp", "tcp-reliable", "tcp-unreliable")
VARIANTS = ("correct", "faulty")
UNRELIABLE = LinkFaults(loss_pct=1.0, dup_pct=1.0, max_delay_ms=100.0)


@dataclass(frozen=True)
class Baseline:
    udp_correct: tuple  # (accepted, rejected)
    udp_faulty: tuple
    tcp_faulty_accepted: int


BASELINES = {
    "vpn": Baseline((1950, 0), (1950, 150), 1125),
    "bookinfo": Baseline((800, 0), (800, 100), 100),
    "store": Baseline((1800, 0), (1800, 100), 400),
    "firewall": Baseline((2100, 0), (2100, 500), 50),
    "dns": Baseline((800, 0), (800, 100), 400),
    "auction": Baseline((2800, 0), (2800, 200), 360),
    "cdn": Baseline((500, 0), (500, 100), 200),
    "sip": Baseline((350, 0), (350, 150), 200),
    "pop3": Baseline((1000, 0), (1000, 500), 500),
    "game": Baseline((3000, 0), (3000, 250), 800),
}


def _inj(n: int, before: int, recipient: str, label: str) -> tuple:
    return tuple(Injection(before, recipient, label) for _ in range(n))


def _bookinfo():
    # Info asks Review for details before anything else
    bad = {"Info": Conformant(injections=_inj(1, 0, "Review", "detail_request"))}
    return [SessionGroup(100, bad)], {}


def _store():
    picks = {"Client": Conformant(("ConfirmOrder", "ConfirmOrder")),
             "Payment": Conformant(("InvalidCC", "ValidCC"))}
    bad = dict(picks, Client=Conformant(("ConfirmOrder", "ConfirmOrder"), _inj(1, 1, "HTTP", "PlaceOrder")))
    return [SessionGroup(100, bad)], {}


def _vpn():
    a_picks = ("ClientRequest",) * 7 + ("Terminate",) + ("ClientRequest",) * 7 + ("Terminate",)
    auth = Conformant(("Accept",))
    good = {"ClientA": Conformant(a_picks), "Auth": auth}
    # right after authentication ClientA answers B instead of asking
    bad = {"ClientA": Conformant(a_picks, _inj(6, 1, "ClientB", "ClientResponse")), "Auth": auth}
    return [SessionGroup(25, bad), SessionGroup(25, good)], {}


def _firewall():
    int_picks = Conformant(("Request",) * 10 + ("Terminate",))
    ext_picks = ("Request",) * 10 + ("Terminate",)
    # the outside answers with requests while it should only respond
    bad = {"ClientInt": int_picks, "ClientExt": Conformant(ext_picks, _inj(10, 0, "ClientInt", "Request"))}
    return [SessionGroup(50, bad)], {}


def _dns():
    bad = {"TLDDNS": Conformant(injections=_inj(1, 0, "LocalDNS", "ResponseRoot"))}
    return [SessionGroup(100, bad)], {}


def _auction():
    def rounds(n):
        return Conformant(("Resend",) * n + ("BuyerA!Winner",))
    bad = Conformant(injections=_inj(5, 2, "Auction", "Pay"))
    return [SessionGroup(10, {"Auction": rounds(17), "BuyerA": bad}),
            SessionGroup(30, {"Auction": rounds(16), "BuyerA": bad})], {}


def _cdn():
    bad = {"IntServer": Conformant(injections=_inj(1, 0, "LocalDNS", "IPAddr"))}
    return [SessionGroup(100, bad), SessionGroup(25, {})], {"unmonitored": ("LocalDNS", "User")}


def _sip():
    b = Conformant(("Ringing", "OK"))
    proxy = ("INVITE",)
    bad = {"ClientB": b, "Proxy": Conformant(proxy, _inj(5, 1, "ClientA", "OK"))}
    good = {"ClientB": b, "Proxy": Conformant(proxy)}
    return [SessionGroup(30, bad), SessionGroup(20, good)], {}


def _pop3():
    client = Conformant(("ListMsgs", "NoOp", "Retransmit", "Delete") * 2 + ("ListMsgs", "NoOp", "Quit"))
    server = ("OK", "OK", "OK", "ERR", "OK", "OK")
    # after the first listing request the server replies with an error instead of messages
    bad = {"Client": client, "Server": Conformant(server, _inj(20, 2, "Client", "ERR"))}
    good = {"Client": client, "Server": Conformant(server)}
    return [SessionGroup(25, bad), SessionGroup(15, good)], {}


def _game():
    server = Conformant(("TurnStart", "TurnStart", "Player1!Victory"))

    def bad(n):
        return {"GameServer": server, "Coordinator": Conformant(injections=_inj(n, 2, "GameServer", "Victory"))}
    return [SessionGroup(50, bad(2)), SessionGroup(150, bad(1))], {}


_BUILDERS = {
    "bookinfo": _bookinfo, "store": _store, "vpn": _vpn, "firewall": _firewall, "dns": _dns,
    "auction": _auction, "cdn": _cdn, "sip": _sip, "pop3": _pop3, "game": _game,
}


def _strip_faults(groups):
    out = []
    for g in groups:
        scripts = {r: replace(s, injections=()) for r, s in g.scripts.items() if isinstance(s, Conformant)}
        out.append(SessionGroup(g.count, scripts))
    return out


def preset(protocol: str, transport: str = "udp", variant: str = "correct", seed: int = 0,
           monitored: bool = True) -> Scenario:
    key = protocol.lower()
    if key not in _BUILDERS:
        raise KeyError(f"no preset for {protocol!r}; choose from {sorted(_BUILDERS)}")
    if transport not in TRANSPORTS:
        raise ValueError(f"transport must be one of {TRANSPORTS}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    groups, extra = _BUILDERS[key]()
    if variant == "correct":
        groups = _strip_faults(groups)
    return Scenario(
        protocol=key,
        groups=groups,
        transport="udp" if transport == "udp" else "tcp",
        faults=UNRELIABLE if transport == "tcp-unreliable" else LinkFaults(),
        seed=seed,
        monitored=monitored,
        variant=variant,
        **extra,
    )


def preset_names() -> list[str]:
    return list(_BUILDERS)
