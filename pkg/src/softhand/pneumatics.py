"""Control-board emulation: PWM valves, chamber dynamics, regulation.

Each channel is one 3/2-way valve driven at a fixed PWM frequency; the
chamber behind it fills from a regulated supply with time constant
tau_fill and vents to atmosphere with tau_vent.  Pressures are gauge
(atmosphere = 0 kPa).  Two integrators are provided: an averaged model
that treats the duty cycle as a continuous mixing ratio (exact linear-ODE
closed form per step) and an event-driven model that switches the valve
within every PWM period.  No operation waits on wall-clock time; all time
is simulated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import SafetyLimitError, ValidationError
from .hand import (DEFAULT_FINGER_LIMIT_KPA, PALM_A_LIMIT_KPA,
                   PALM_B_LIMIT_KPA, FingerRole, PressureState)


class ValveMode(enum.Enum):
    FILL = "fill"
    VENT = "vent"
    CLOSED = "closed"


@dataclass(frozen=True)
class ValveChannel:
    """One solenoid valve line: identity, commanded mode/duty and the
    channel's safety ceiling [kPa]."""

    id: int
    mode: ValveMode = ValveMode.CLOSED
    duty: float = 0.0
    safety_limit: float = DEFAULT_FINGER_LIMIT_KPA

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError("id", "must be non-negative")
        if not 0.0 <= self.duty <= 1.0:
            raise ValidationError("duty", f"{self.duty} outside [0, 1]")
        if self.safety_limit <= 0:
            raise ValidationError("safety_limit", "must be positive")


@dataclass(frozen=True)
class PneumaticConfig:
    """Board-level timing and supply parameters."""

    supply_pressure: float = 150.0
    pwm_frequency: float = 60.0
    tau_fill: float = 0.15
    tau_vent: float = 0.15
    tick: float = 0.004

    def __post_init__(self):
        if self.supply_pressure <= 0:
            raise ValidationError("supply_pressure", "must be positive")
        if self.pwm_frequency <= 0:
            raise ValidationError("pwm_frequency", "must be positive")
        if self.tau_fill <= 0 or self.tau_vent <= 0:
            raise ValidationError("tau", "time constants must be positive")
        if self.tick <= 0:
            raise ValidationError("tick", "must be positive")
        if self.tick > 1.0 / (4.0 * self.pwm_frequency):
            raise ValidationError(
                "tick", "must not exceed a quarter PWM period")

    @property
    def period(self):
        return 1.0 / self.pwm_frequency

    @staticmethod
    def from_config(config):
        """Build from the `pneumatics` section of a hand config dict."""
        pn = config["pneumatics"]
        return PneumaticConfig(
            supply_pressure=float(pn["supply_kpa"]),
            pwm_frequency=float(pn["pwm_hz"]),
            tau_fill=float(pn["tau_fill_s"]),
            tau_vent=float(pn["tau_vent_s"]),
            tick=float(pn["tick_s"]))


@dataclass(frozen=True)
class SafetyEvent:
    """Raised (as a record) whenever a channel clamps at its limit."""

    channel: int
    attempted_kpa: float
    limit_kpa: float
    time_s: float


def channel_limits(hand):
    """Per-channel safety ceilings [kPa] for a hand description."""
    limits = [DEFAULT_FINGER_LIMIT_KPA] * hand.channel_count
    for role in FingerRole:
        spec = hand.finger(role)
        for c in hand.finger_channels(role):
            limits[c] = spec.max_pressure_kpa
    limits[hand.palm_a_channel] = PALM_A_LIMIT_KPA
    limits[hand.palm_bend_channel] = PALM_B_LIMIT_KPA
    limits[hand.thumb_abduction_channel] = PALM_B_LIMIT_KPA
    return tuple(limits)


def duty_to_steady_pressure(duty, cfg):
    """Fixed point of the averaged fill/vent balance; monotone in duty."""
    if not 0.0 <= duty <= 1.0:
        raise ValidationError("duty", f"{duty} outside [0, 1]")
    num = duty * cfg.supply_pressure * cfg.tau_vent
    den = duty * cfg.tau_vent + (1.0 - duty) * cfg.tau_fill
    return num / den


def steady_pressure_to_duty(target, cfg):
    """Feed-forward inverse of duty_to_steady_pressure."""
    if target < 0:
        raise ValidationError("target", "must be non-negative")
    if target > cfg.supply_pressure:
        raise ValidationError("target", "exceeds supply pressure")
    num = target * cfg.tau_fill
    den = cfg.tau_vent * (cfg.supply_pressure - target) + target * cfg.tau_fill
    if den == 0.0:
        return 1.0
    return min(max(num / den, 0.0), 1.0)


def _averaged_step_one(p0, duty, cfg, dt):
    """Closed-form solution of dP/dt = duty*(Ps-P)/tau_f - (1-duty)*P/tau_v."""
    a = duty * cfg.supply_pressure / cfg.tau_fill
    b = duty / cfg.tau_fill + (1.0 - duty) / cfg.tau_vent
    if b == 0.0:
        return p0 + a * dt
    p_inf = a / b
    return p_inf + (p0 - p_inf) * math.exp(-b * dt)


def _validated_duties(duties, n):
    duties = [float(d) for d in duties]
    if len(duties) != n:
        raise ValidationError("duties",
                              f"expected {n} duties, got {len(duties)}")
    for i, d in enumerate(duties):
        if not 0.0 <= d <= 1.0:
            raise ValidationError(f"duties[{i}]", f"{d} outside [0, 1]")
    return duties


def _clamped(values, limits, t, events):
    out = []
    for i, p in enumerate(values):
        limit = limits[i] if limits is not None else float("inf")
        if p > limit:
            if events is not None:
                events.append(SafetyEvent(channel=i, attempted_kpa=p,
                                          limit_kpa=limit, time_s=t))
            p = limit
        out.append(p)
    return out


def step_averaged(state, duties, cfg, dt, limits=None, events=None):
    """Advance all channels by dt using the continuous-duty model.

    The per-channel ODE is integrated in closed form, so one step of dt
    equals two steps of dt/2 to floating-point accuracy.  Channels that
    would exceed their safety limit clamp there and append a SafetyEvent
    to `events` (if given).
    """
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    duties = _validated_duties(duties, len(state.channel_pressures))
    t1 = state.timestamp_s + dt
    raw = [_averaged_step_one(p, d, cfg, dt)
           for p, d in zip(state.channel_pressures, duties)]
    clamped = _clamped(raw, limits, t1, events)
    return PressureState(tuple(clamped), tuple(duties), t1)


def _event_step_one(p0, duty, cfg, periods):
    t_fill = duty * cfg.period
    t_vent = cfg.period - t_fill
    ps = cfg.supply_pressure
    for _ in range(periods):
        if t_fill > 0:
            p0 = ps + (p0 - ps) * math.exp(-t_fill / cfg.tau_fill)
        if t_vent > 0:
            p0 = p0 * math.exp(-t_vent / cfg.tau_vent)
    return p0


def step_event_driven(state, duties, cfg, dt, limits=None, events=None):
    """Advance by dt switching each valve within every PWM period.

    dt must be a whole number of PWM periods (each period starts with the
    fill phase); misaligned steps are rejected rather than silently
    rounded.
    """
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    periods_f = dt * cfg.pwm_frequency
    periods = round(periods_f)
    if periods < 1 or abs(periods_f - periods) > 1e-9 * max(1.0, periods_f):
        raise ValidationError(
            "dt", f"{dt} s is not a whole number of PWM periods "
            f"({cfg.period:.6g} s)")
    duties = _validated_duties(duties, len(state.channel_pressures))
    t1 = state.timestamp_s + dt
    raw = [_event_step_one(p, d, cfg, periods)
           for p, d in zip(state.channel_pressures, duties)]
    clamped = _clamped(raw, limits, t1, events)
    return PressureState(tuple(clamped), tuple(duties), t1)


def event_steady_stats(duty, cfg):
    """(period mean, peak-to-trough ripple) [kPa] of the switched model's
    steady-state limit cycle at a fixed duty."""
    if not 0.0 <= duty <= 1.0:
        raise ValidationError("duty", f"{duty} outside [0, 1]")
    ps = cfg.supply_pressure
    t_fill = duty * cfg.period
    t_vent = cfg.period - t_fill
    alpha = math.exp(-t_fill / cfg.tau_fill)
    beta = math.exp(-t_vent / cfg.tau_vent)
    if alpha * beta >= 1.0:  # duty 0 with no vent time cannot happen; guard
        return 0.0, 0.0
    # limit cycle: trough at period start, peak after the fill phase
    p_trough = ps * (1.0 - alpha) * beta / (1.0 - alpha * beta)
    p_peak = ps + (p_trough - ps) * alpha
    # exact time integrals over the two exponential phases
    fill_int = ps * t_fill + (p_trough - ps) * cfg.tau_fill * (1.0 - alpha)
    vent_int = p_peak * cfg.tau_vent * (1.0 - beta)
    mean = (fill_int + vent_int) / cfg.period
    return mean, p_peak - p_trough


def regulate_to_target(targets, current, cfg, limits=None, kp=2.0,
                       override=False):
    """Per-channel duty commands driving pressures toward targets.

    Feed-forward duty from the steady-state inverse plus a proportional
    correction on the pressure error, clamped to [0, 1].  Targets above a
    channel's safety limit raise SafetyLimitError unless `override` is
    set (intended for the deliberate post-contact squeeze).
    """
    targets = [float(t) for t in targets]
    n = len(current.channel_pressures)
    if len(targets) != n:
        raise ValidationError("targets",
                              f"expected {n} targets, got {len(targets)}")
    duties = []
    for i, target in enumerate(targets):
        if target < 0:
            raise ValidationError(f"targets[{i}]", "must be non-negative")
        limit = limits[i] if limits is not None else float("inf")
        if target > limit and not override:
            raise SafetyLimitError(i, target, limit)
        ff = steady_pressure_to_duty(min(target, cfg.supply_pressure), cfg)
        err = target - current.channel_pressures[i]
        duty = ff + kp * err / cfg.supply_pressure
        duties.append(min(max(duty, 0.0), 1.0))
    return tuple(duties)


# -- flex sensor ------------------------------------------------------------

@dataclass(frozen=True)
class FlexSensorParams:
    """Affine bend sensor: R = r0 * (1 + gain * angle_deg), in kOhm."""

    r0_kohm: float = 25.0
    gain_per_deg: float = 0.008

    def __post_init__(self):
        if self.r0_kohm <= 0:
            raise ValidationError("r0_kohm", "must be positive")
        if self.gain_per_deg <= 0:
            raise ValidationError("gain_per_deg", "must be positive")


def flex_sensor_reading(bend_angle_deg, params=FlexSensorParams()):
    """Sensor resistance [kOhm] at a bend angle [deg]."""
    if bend_angle_deg < 0:
        raise ValidationError("bend_angle_deg", "must be non-negative")
    return params.r0_kohm * (1.0 + params.gain_per_deg * bend_angle_deg)


def flex_sensor_angle(resistance_kohm, params=FlexSensorParams()):
    """Inverse of flex_sensor_reading."""
    if resistance_kohm < params.r0_kohm:
        raise ValidationError("resistance_kohm", "below the flat reading")
    return (resistance_kohm / params.r0_kohm - 1.0) / params.gain_per_deg


# -- duty sweep export ------------------------------------------------------

DUTY_SWEEP_HEADER = "duty,steady_kpa,ripple_kpa"


def duty_sweep_rows(cfg, duties=None):
    if duties is None:
        duties = [round(0.05 * i, 2) for i in range(21)]
    rows = []
    for d in duties:
        mean, ripple = event_steady_stats(d, cfg)
        rows.append((float(d), duty_to_steady_pressure(d, cfg), ripple))
    return rows


def duty_sweep_csv(cfg, duties=None):
    lines = [DUTY_SWEEP_HEADER]
    for d, steady, ripple in duty_sweep_rows(cfg, duties):
        lines.append(f"{d:.6g},{steady:.9g},{ripple:.9g}")
    return "\n".join(lines) + "\n"
