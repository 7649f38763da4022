// DOM wiring: consent form -> 16 option-card questions -> completion screen.

import { Condition, QueryPayload, Results, ServiceError, SurveyApi } from "./api.js"
import { cardAriaLabel, costLabel, latencyLabel, MODE_ICONS, modeTitle, riskLabel } from "./format.js"
import { FlowState, SurveyFlow, TokenStorage } from "./state.js"

const params = new URLSearchParams(location.search)
const baseUrl = params.get("service") ?? "http://127.0.0.1:8000"

const localTokenStorage: TokenStorage = {
  get: () => localStorage.getItem("fareopt-session"),
  set: (token) => localStorage.setItem("fareopt-session", token),
  clear: () => localStorage.removeItem("fareopt-session"),
}

const api = new SurveyApi(baseUrl)
const flow = new SurveyFlow(api, localTokenStorage)
const root = document.getElementById("app") as HTMLElement

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

function render(state: FlowState): void {
  root.replaceChildren()
  if (state.stage === "consent") renderConsent()
  else if (state.stage === "question") renderQuestion(state.query)
  else renderDone(state.results)
}

function renderError(message: string): void {
  const banner = el("div", "error-banner", message)
  const retry = el("button", "retry", "Retry")
  retry.onclick = () => {
    void flow.load().then(render, (e) => renderError(describe(e)))
  }
  banner.append(" ", retry)
  root.prepend(banner)
}

function describe(error: unknown): string {
  if (error instanceof ServiceError) return `${error.code}: ${error.message}`
  return "network failure; the service may be unreachable"
}

function renderConsent(): void {
  const panel = el("section", "panel")
  panel.append(el("h1", undefined, "Transport choices survey"))
  panel.append(el("p", undefined,
    "You will answer 16 hypothetical questions. Each shows six ways to make " +
    "the same trip with an estimated travel time, price, and infection-risk " +
    "indication. Pick the option you would actually take."))

  const residence = el("input") as HTMLInputElement
  residence.placeholder = "Place of residence"
  residence.id = "residence"

  const covid = el("input") as HTMLInputElement
  covid.type = "checkbox"
  covid.id = "covid"
  const covidLabel = el("label", "checkbox")
  covidLabel.append(covid, " I previously tested positive for COVID-19")

  const consent = el("input") as HTMLInputElement
  consent.type = "checkbox"
  consent.id = "consent"
  const consentLabel = el("label", "checkbox")
  consentLabel.append(consent, " I consent to my anonymized answers being used for research")

  const condition = el("select") as HTMLSelectElement
  for (const [value, label] of [
    ["post_pandemic", "Answer as you choose today"],
    ["pre_pandemic", "Answer as you would have chosen before the pandemic"],
  ] as const) {
    const option = el("option") as HTMLOptionElement
    option.value = value
    option.textContent = label
    condition.append(option)
  }

  const submit = el("button", "primary", "Start survey") as HTMLButtonElement
  submit.disabled = true
  consent.onchange = () => {
    submit.disabled = !consent.checked
  }
  submit.onclick = () => {
    submit.disabled = true
    flow
      .start(
        {
          residence: residence.value,
          prior_covid_infection: covid.checked,
          consent: consent.checked,
        },
        condition.value as Condition,
      )
      .then(render)
      .catch((error) => {
        submit.disabled = !consent.checked
        renderError(describe(error))
      })
  }

  panel.append(residence, covidLabel, consentLabel, condition, submit)
  root.append(panel)
}

function renderQuestion(query: QueryPayload): void {
  const panel = el("section", "panel")
  const phase = query.phase
  const banner = query.condition === "pre_pandemic"
    ? "Imagine it is before the pandemic."
    : "Answer for today's conditions."
  panel.append(el("p", "condition-banner", banner))
  panel.append(el(
    "h2", undefined,
    `Question ${query.progress.answered + 1} of ${query.progress.total}` +
    (phase.name === "active" ? "" : " (validation)"),
  ))

  const grid = el("div", "cards")
  query.options.forEach((option, index) => {
    // Cards render in payload order; the submitted index is the card index.
    const card = el("button", "card") as HTMLButtonElement
    card.setAttribute("aria-label", cardAriaLabel(option))
    card.append(el("div", "icon", MODE_ICONS[option.mode]))
    card.append(el("div", "mode", modeTitle(option)))
    card.append(el("div", "attr", latencyLabel(option.latency)))
    card.append(el("div", "attr", costLabel(option.cost)))
    card.append(el("div", "attr risk", riskLabel(option)))
    card.onclick = () => {
      for (const button of grid.querySelectorAll("button")) button.disabled = true
      flow.answer(query, index).then(render, (error) => {
        renderError(describe(error))
        for (const button of grid.querySelectorAll("button")) button.disabled = false
      })
    }
    grid.append(card)
  })
  panel.append(grid)

  const progress = el("progress") as HTMLProgressElement
  progress.max = query.progress.total
  progress.value = query.progress.answered
  panel.append(progress)
  root.append(panel)
}

function renderDone(results: Results): void {
  const panel = el("section", "panel")
  panel.append(el("h1", undefined, "Thank you!"))
  panel.append(el("p", undefined,
    `You answered ${results.dataset.length} questions.`))
  if (results.holdout_accuracy !== null) {
    panel.append(el("p", undefined,
      "From your first answers we learned a preference model; it predicted " +
      `${Math.round(results.holdout_accuracy * 100)}% of your validation answers.`))
  }
  const restart = el("button", "primary", "Start another session")
  restart.onclick = () => {
    flow.reset()
    render({ stage: "consent" })
  }
  panel.append(restart)
  root.append(panel)
}

void api.health().then((ok) => {
  if (!ok) renderError(`service unreachable at ${baseUrl} (append ?service=http://host:port)`)
  return flow.load().then(render)
}).catch((error) => renderError(describe(error)))
