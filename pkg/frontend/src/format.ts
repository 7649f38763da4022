// Pure attribute-to-label mapping for option cards. The numbers shown are
// exactly the service payload values; rounding is display-only and never
// reorders anything.

import type { OptionPayload } from "./api.js"

export const MODE_LABELS: Record<OptionPayload["mode"], string> = {
  car: "Private car",
  taxi: "Taxi",
  rail: "Train",
  walk: "Walk",
}

export const MODE_ICONS: Record<OptionPayload["mode"], string> = {
  car: "\u{1F697}",
  taxi: "\u{1F695}",
  rail: "\u{1F686}",
  walk: "\u{1F6B6}",
}

export function modeTitle(option: OptionPayload): string {
  const base = MODE_LABELS[option.mode]
  return option.road_index === null ? base : `${base} via road ${option.road_index + 1}`
}

export function latencyLabel(minutes: number): string {
  return `${roundTo(minutes, 0)} min`
}

export function costLabel(cost: number): string {
  return cost === 0 ? "free" : `$${roundTo(cost, 2)}`
}

export function riskLabel(option: OptionPayload): string {
  const display = option.risk_display
  switch (display.kind) {
    case "none":
      return "no infection exposure"
    case "rail_occupancy":
      return `${roundTo(display.percent ?? 0, 0)}% full`
    case "exposure":
      return `≈${roundTo(display.minutes ?? option.risk, 0)} exposure-minutes`
  }
}

export function cardAriaLabel(option: OptionPayload): string {
  return (
    `${modeTitle(option)}: ${latencyLabel(option.latency)}, ` +
    `${costLabel(option.cost)}, ${riskLabel(option)}`
  )
}

function roundTo(value: number, digits: number): string {
  const factor = 10 ** digits
  const rounded = Math.round(value * factor) / factor
  return digits === 0 ? String(Math.round(rounded)) : String(rounded)
}
