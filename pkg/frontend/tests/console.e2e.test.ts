// End-to-end: a real gateway process, the real console DOM.
//
// Spawns the Python CLI to seed a demo network and serve HTTP, then drives
// the farm view (record a vaccination), the recall view (pull exactly one of
// three affected batches), and the scan view (verify the printed QR payload)
// through DOM events only.

import {ChildProcess, spawn} from "node:child_process";
import {mkdtempSync, rmSync} from "node:fs";
import {tmpdir} from "node:os";
import {join} from "node:path";
import {afterAll, beforeAll, describe, expect, it} from "vitest";

import {Gateway} from "../src/api.js";
import {mountApp} from "../src/views.js";

const PORT = 8455;
const BASE = `http://127.0.0.1:${PORT}`;

let dataDir: string;
let server: ChildProcess | undefined;
let qrPayload = "";

function run(args: string[]): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn("plv", args, {stdio: ["ignore", "pipe", "pipe"]});
    let out = "";
    let err = "";
    child.stdout!.on("data", (chunk) => { out += chunk; });
    child.stderr!.on("data", (chunk) => { err += chunk; });
    child.on("exit", (code) => {
      if (code === 0) resolve(out);
      else reject(new Error(`plv ${args.join(" ")} failed (${code}): ${err}`));
    });
  });
}

async function waitFor(check: () => boolean | Promise<boolean>,
                       what: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      if (await check()) return;
    } catch {
      // keep polling
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(`timed out waiting for ${what}`);
}

function setValue(root: HTMLElement, selector: string, value: string): void {
  const input = root.querySelector(selector) as HTMLInputElement | null;
  if (!input) throw new Error(`no input ${selector}`);
  input.value = value;
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "plv-console-"));
  const demoOut = await run(["--data", dataDir, "demo"]);
  qrPayload = demoOut.match(/sample QR payload: (\S+)/)?.[1] ?? "";
  expect(qrPayload).toMatch(/^PLV1:/);
  server = spawn("plv", ["--data", dataDir, "serve", "--port", String(PORT)],
                 {stdio: "ignore"});
  await waitFor(async () => {
    const response = await fetch(`${BASE}/health`);
    return response.ok;
  }, "gateway /health");
});

afterAll(() => {
  server?.kill();
  if (dataDir) rmSync(dataDir, {recursive: true, force: true});
});

describe("console against a live gateway", () => {
  it("farm view records a vaccination and shows the VALID badge", async () => {
    const gateway = new Gateway(BASE, "tok-farm-a");
    const who = await gateway.whoami();
    expect(who.role).toBe("FARM");

    const root = document.createElement("div");
    document.body.append(root);
    mountApp(root, gateway, who);

    const form = root.querySelector("#event-form") as HTMLFormElement;
    setValue(form, 'input[name="animal_id"]', "cow-001");
    (form.querySelector('select[name="kind"]') as HTMLSelectElement).value =
      "VACCINATION";
    setValue(form, 'input[name="detail"]', "IBR booster");
    setValue(form, 'input[name="at"]', "2024-06-01");
    form.dispatchEvent(new Event("submit", {bubbles: true, cancelable: true}));

    const result = form.querySelector(".result") as HTMLElement;
    await waitFor(() => result.textContent !== "", "event result badge");
    expect(result.className).toContain("ok");
    expect(result.textContent).toMatch(/^VALID · [0-9a-f]{64}$/);
    root.remove();
  });

  it("farm view surfaces a typed refusal verbatim for a foreign animal", async () => {
    const gateway = new Gateway(BASE, "tok-farm-b");
    const who = await gateway.whoami();
    const root = document.createElement("div");
    document.body.append(root);
    mountApp(root, gateway, who);

    const form = root.querySelector("#event-form") as HTMLFormElement;
    setValue(form, 'input[name="animal_id"]', "cow-001");  // Ferma Alba's cow
    setValue(form, 'input[name="at"]', "2024-06-02");
    form.dispatchEvent(new Event("submit", {bubbles: true, cancelable: true}));

    const result = form.querySelector(".result") as HTMLElement;
    await waitFor(() => result.textContent !== "", "refusal badge");
    expect(result.className).toContain("err");
    expect(result.textContent).toContain("NOT_OWNER");
    // the form keeps its values for correction
    expect((form.querySelector('input[name="animal_id"]') as HTMLInputElement).value)
      .toBe("cow-001");
    root.remove();
  });

  it("recall view pulls exactly one of three affected batches", async () => {
    const gateway = new Gateway(BASE, "tok-auditor");
    const who = await gateway.whoami();
    expect(who.role).toBe("AUDITOR");

    const root = document.createElement("div");
    document.body.append(root);
    mountApp(root, gateway, who);
    (root.querySelector('[data-view="recall"]') as HTMLButtonElement).click();

    const origin = root.querySelector("#recall-origin") as HTMLInputElement;
    origin.value = "milk-a1";
    (root.querySelector("#recall-trace-btn") as HTMLButtonElement).click();

    await waitFor(() => root.querySelectorAll("tr[data-batch]").length === 3,
                  "three-row recall report");
    const submit = root.querySelector("#recall-submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);  // nothing checked yet

    const row = root.querySelector('tr[data-batch="cheese-1"]') as HTMLElement;
    const checkbox = row.querySelector("input.batch-check") as HTMLInputElement;
    checkbox.checked = true;
    checkbox.dispatchEvent(new Event("change", {bubbles: true}));
    await waitFor(() => !submit.disabled, "submit enabled");
    submit.click();

    const confirmation = root.querySelector("#recall-result") as HTMLElement;
    await waitFor(() => (confirmation.textContent ?? "").includes("recalled"),
                  "recall confirmation");
    expect(confirmation.textContent).toContain("VALID");
    expect(confirmation.textContent).toContain("cheese-1");

    // the refreshed table marks exactly the pulled batch
    await waitFor(() => {
      const refreshed = root.querySelector('tr[data-batch="cheese-1"]');
      return (refreshed?.textContent ?? "").includes("RECALLED");
    }, "refreshed RECALLED status");
    for (const other of ["milk-a1", "pack-1"]) {
      const otherRow = root.querySelector(`tr[data-batch="${other}"]`) as HTMLElement;
      expect(otherRow.textContent).toContain("in circulation");
    }

    // the gateway agrees: only cheese-1 is blocked
    expect((await gateway.batch("cheese-1")).recalled).toBe(true);
    expect((await gateway.batch("pack-1")).recalled).toBe(false);
    root.remove();
  });

  it("scan view verifies the demo QR payload without a token", async () => {
    const gateway = new Gateway(BASE, null);
    const root = document.createElement("div");
    document.body.append(root);
    mountApp(root, gateway, null);

    const input = root.querySelector("#scan-input") as HTMLInputElement;
    input.value = qrPayload;
    (root.querySelector("#scan-btn") as HTMLButtonElement).click();

    const status = root.querySelector("#scan-status") as HTMLElement;
    await waitFor(() => status.textContent !== "", "scan status");
    expect(status.textContent).toContain("authentic");
    const tree = root.querySelector("#scan-result .trace-tree") as HTMLElement;
    expect(tree.textContent).toContain("pack-1");
    expect(tree.textContent).toContain("milk-a1");
    expect(root.querySelector("#scan-result .origins")?.textContent)
      .toContain("farm-0001");

    // a tampered payload is rejected
    input.value = qrPayload.slice(0, -1) + (qrPayload.endsWith("0") ? "1" : "0");
    (root.querySelector("#scan-btn") as HTMLButtonElement).click();
    await waitFor(() => (status.textContent ?? "").includes("INVALID"),
                  "tamper rejection");
    root.remove();
  });
});
