// Tiny DOM builders; no framework, no virtual anything.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "text") node.textContent = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

export function labeled(labelText: string, input: HTMLElement): HTMLLabelElement {
  return el("label", {}, [el("span", {text: labelText}), input]);
}

export function textInput(name: string, placeholder = "",
                          value = ""): HTMLInputElement {
  const input = el("input", {type: "text", name, placeholder});
  input.value = value;
  return input;
}

export function selectInput(name: string, options: string[]): HTMLSelectElement {
  const select = el("select", {name});
  for (const option of options) {
    select.append(el("option", {value: option, text: option}));
  }
  return select;
}

/** Inline status line under a form: ok badge, typed refusal, or network error. */
export class ResultLine {
  readonly node: HTMLElement;

  constructor() {
    this.node = el("output", {class: "result"});
  }

  ok(text: string): void {
    this.node.className = "result ok";
    this.node.textContent = text;
  }

  fail(text: string): void {
    this.node.className = "result err";
    this.node.textContent = text;
  }

  clear(): void {
    this.node.className = "result";
    this.node.textContent = "";
  }
}

export function formValues(form: HTMLFormElement): Record<string, string> {
  const values: Record<string, string> = {};
  for (const element of Array.from(form.elements)) {
    const input = element as HTMLInputElement;
    if (input.name) values[input.name] = input.value;
  }
  return values;
}

export function csv(raw: string): string[] {
  return raw.split(",").map((s) => s.trim()).filter((s) => s.length > 0);
}
