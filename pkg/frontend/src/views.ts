// The four operator views. Every figure on screen comes straight out of a
// gateway response field; this module renders, it never derives.

import {BatchDoc, Gateway, GatewayError, RecallReport, TraceBack, WhoAmI} from "./api.js";
import {ResultLine, csv, el, formValues, labeled, selectInput, textInput} from "./dom.js";

function describe(err: unknown): string {
  if (err instanceof GatewayError) {
    return err.detail ? `${err.code}: ${err.detail}` : err.code;
  }
  return `connection error: ${(err as Error).message ?? String(err)}`;
}

function asyncForm(form: HTMLFormElement, result: ResultLine,
                   handler: () => Promise<string>): void {
  form.onsubmit = (event) => {
    event.preventDefault();
    result.clear();
    handler()
      .then((message) => result.ok(message))
      .catch((err) => result.fail(describe(err)));
  };
}

// ---------------------------------------------------------------------------
// Farm view
// ---------------------------------------------------------------------------

export function farmView(gateway: Gateway, who: WhoAmI | null): HTMLElement {
  const view = el("section", {id: "farm-view", class: "view"});
  view.append(el("h2", {text: "Farm"}));

  const animalForm = el("form", {id: "animal-form"});
  const animalResult = new ResultLine();
  animalForm.append(
    el("h3", {text: "Register animal"}),
    labeled("Animal id", textInput("animal_id", "cow-001")),
    labeled("Born", textInput("born_at", "2024-03-01")),
    el("button", {type: "submit", text: "Register"}),
    animalResult.node,
  );
  asyncForm(animalForm, animalResult, async () => {
    const values = formValues(animalForm);
    const tx = await gateway.registerAnimal(values.animal_id, values.born_at);
    return `${tx.validity} · ${tx.tx_id}`;
  });

  const eventForm = el("form", {id: "event-form"});
  const eventResult = new ResultLine();
  eventForm.append(
    el("h3", {text: "Record animal event"}),
    labeled("Animal id", textInput("animal_id", "cow-001")),
    labeled("Kind", selectInput("kind", ["VACCINATION", "MEDICINE", "LOCATION"])),
    labeled("Detail", textInput("detail", "IBR dose 1")),
    labeled("Date", textInput("at", "2024-05-10")),
    el("button", {type: "submit", text: "Record"}),
    eventResult.node,
  );
  asyncForm(eventForm, eventResult, async () => {
    const values = formValues(eventForm);
    const tx = await gateway.recordAnimalEvent(values.animal_id, values.kind,
                                               values.detail, values.at);
    return `${tx.validity} · ${tx.tx_id}`;
  });

  const batchForm = el("form", {id: "batch-form"});
  const batchResult = new ResultLine();
  batchForm.append(
    el("h3", {text: "Register milk batch"}),
    labeled("Batch id", textInput("batch_id", "milk-7")),
    labeled("Source animals (comma separated)", textInput("source_animals", "cow-001")),
    labeled("RFID payload", textInput("rfid", "tag-0007")),
    el("button", {type: "submit", text: "Register batch"}),
    batchResult.node,
  );
  asyncForm(batchForm, batchResult, async () => {
    const values = formValues(batchForm);
    const tx = await gateway.registerBatch(values.batch_id,
                                           csv(values.source_animals), values.rfid);
    return `${tx.validity} · ${tx.tx_id}`;
  });

  const tokensPanel = el("div", {id: "farm-tokens"});
  const tokensResult = new ResultLine();
  const tokensButton = el("button", {type: "button", text: "Show my tokens"});
  const tokensList = el("ul", {id: "token-list"});
  tokensButton.onclick = () => {
    tokensResult.clear();
    tokensList.textContent = "";
    if (!who) {
      tokensResult.fail("log in with a farm token first");
      return;
    }
    gateway.tokens(who.id)
      .then((entry) => {
        tokensResult.ok(`balance ${entry.balance}`);
        for (const token of entry.tokens) {
          tokensList.append(el("li", {text: token}));
        }
      })
      .catch((err) => tokensResult.fail(describe(err)));
  };
  tokensPanel.append(el("h3", {text: "Token ledger"}), tokensButton,
                     tokensResult.node, tokensList);

  view.append(animalForm, eventForm, batchForm, tokensPanel);
  return view;
}

// ---------------------------------------------------------------------------
// Processor view
// ---------------------------------------------------------------------------

export function processorView(gateway: Gateway): HTMLElement {
  const view = el("section", {id: "processor-view", class: "view"});
  view.append(el("h2", {text: "Processor"}));

  const processForm = el("form", {id: "process-form"});
  const processResult = new ResultLine();
  const records = el("ul", {id: "process-records"});
  processForm.append(
    el("h3", {text: "Process step"}),
    labeled("Input batches (comma separated)", textInput("inputs", "milk-7, milk-8")),
    labeled("Output batch id", textInput("output_id", "cheese-7")),
    labeled("Process kind", textInput("process_kind", "cheesemaking")),
    el("button", {type: "submit", text: "Process"}),
    processResult.node,
    records,
  );
  asyncForm(processForm, processResult, async () => {
    records.textContent = "";
    const values = formValues(processForm);
    const tx = await gateway.processBatch(csv(values.inputs), values.output_id,
                                          values.process_kind);
    for (const record of tx.result.transfer_records) {
      records.append(el("li", {
        text: `${record.token} → source ${record.source}, `
          + `receiver ${record.receiver}`,
      }));
    }
    return `${tx.validity} · ${tx.tx_id}`;
  });

  const transferForm = el("form", {id: "transfer-form"});
  const transferResult = new ResultLine();
  transferForm.append(
    el("h3", {text: "Transfer custody"}),
    labeled("Batch id", textInput("batch_id")),
    labeled("To (identity id)", textInput("to")),
    el("button", {type: "submit", text: "Transfer"}),
    transferResult.node,
  );
  asyncForm(transferForm, transferResult, async () => {
    const values = formValues(transferForm);
    const tx = await gateway.transferCustody(values.batch_id, values.to);
    return `${tx.validity} · ${tx.tx_id}`;
  });

  const offerForm = el("form", {id: "offer-form"});
  const offerResult = new ResultLine();
  offerForm.append(
    el("h3", {text: "Publish offer"}),
    labeled("Product batch id", textInput("product_id")),
    labeled("Standard price (minor units)", textInput("standard_price", "1000")),
    labeled("Targeted (buyer:price, comma separated)", textInput("targeted", "")),
    labeled("Settlement", selectInput("settlement",
                                      ["BANK_TRANSFER", "VIRTUAL_CURRENCY"])),
    el("button", {type: "submit", text: "Publish"}),
    offerResult.node,
  );
  asyncForm(offerForm, offerResult, async () => {
    const values = formValues(offerForm);
    const targeted: [string, number][] = csv(values.targeted).map((pair) => {
      const [buyer, price] = pair.split(":").map((s) => s.trim());
      return [buyer, Number.parseInt(price, 10)];
    });
    const offer = await gateway.publishOffer(values.product_id,
                                             Number.parseInt(values.standard_price, 10),
                                             targeted, values.settlement);
    return `published ${offer.offer_id}`;
  });

  const acceptForm = el("form", {id: "accept-form"});
  const acceptResult = new ResultLine();
  acceptForm.append(
    el("h3", {text: "Accept offer"}),
    labeled("Offer id", textInput("offer_id", "offer-1")),
    el("button", {type: "submit", text: "Accept"}),
    acceptResult.node,
  );
  asyncForm(acceptForm, acceptResult, async () => {
    const values = formValues(acceptForm);
    const tx = await gateway.acceptOffer(values.offer_id);
    return `${tx.validity} · paid ${tx.price} · ${tx.tx_id}`;
  });

  view.append(processForm, transferForm, offerForm, acceptForm);
  return view;
}

// ---------------------------------------------------------------------------
// Recall view
// ---------------------------------------------------------------------------

export function renderRecallTable(report: RecallReport,
                                  statuses: Record<string, BatchDoc>): HTMLTableElement {
  const table = el("table", {id: "recall-table"});
  table.append(el("thead", {}, [el("tr", {}, [
    el("th", {text: "recall"}),
    el("th", {text: "batch"}),
    el("th", {text: "holder"}),
    el("th", {text: "status"}),
  ])]));
  const body = el("tbody");
  for (const batchId of report.affected_batches) {
    const recalled = statuses[batchId]?.recalled === true;
    const checkbox = el("input", {type: "checkbox", class: "batch-check"});
    if (recalled) checkbox.disabled = true;
    const row = el("tr", {"data-batch": batchId}, [
      el("td", {}, [checkbox]),
      el("td", {text: batchId}),
      el("td", {text: report.holders[batchId] ?? ""}),
      el("td", {text: recalled ? "RECALLED" : "in circulation",
                class: recalled ? "recalled" : "circulating"}),
    ]);
    body.append(row);
  }
  table.append(body);
  return table;
}

export function recallView(gateway: Gateway): HTMLElement {
  const view = el("section", {id: "recall-view", class: "view"});
  view.append(el("h2", {text: "Recall"}));

  const origin = textInput("origin", "farm or batch id");
  origin.id = "recall-origin";
  const traceButton = el("button", {id: "recall-trace-btn", type: "button",
                                    text: "Trace forward"});
  const banner = el("div", {id: "recall-error", class: "banner"});
  const reportBox = el("div", {id: "recall-report"});
  const submit = el("button", {id: "recall-submit", type: "button",
                               text: "Recall checked batches"});
  submit.disabled = true;
  const confirmation = new ResultLine();
  confirmation.node.id = "recall-result";

  let currentReport: RecallReport | null = null;

  const refreshSubmit = () => {
    const checked = reportBox.querySelectorAll("input.batch-check:checked");
    submit.disabled = checked.length === 0;
  };

  const runTrace = async () => {
    banner.textContent = "";
    confirmation.clear();
    reportBox.textContent = "";
    submit.disabled = true;
    currentReport = null;
    try {
      const report = await gateway.traceForward(origin.value.trim());
      const statuses: Record<string, BatchDoc> = {};
      for (const batchId of report.affected_batches) {
        statuses[batchId] = await gateway.batch(batchId);
      }
      currentReport = report;
      reportBox.append(
        el("p", {
          id: "recall-summary",
          text: `${report.affected_batches.length} affected batches `
            + `at height ${report.generated_at_height}`,
        }),
        renderRecallTable(report, statuses),
      );
      reportBox.querySelectorAll("input.batch-check").forEach((box) => {
        (box as HTMLInputElement).onchange = refreshSubmit;
      });
    } catch (err) {
      banner.textContent = describe(err);
    }
  };
  traceButton.onclick = () => { void runTrace(); };

  submit.onclick = () => {
    if (!currentReport) return;
    const checked = Array.from(
      reportBox.querySelectorAll("tr[data-batch]"),
    ).filter((row) => (row.querySelector("input.batch-check") as HTMLInputElement).checked)
      .map((row) => (row as HTMLElement).dataset.batch as string);
    if (checked.length === 0) return;  // guard: nothing to recall
    confirmation.clear();
    gateway.recall(currentReport.origin, checked)
      .then(async (result) => {
        confirmation.ok(`${result.validity} · recalled ${checked.join(", ")}`);
        await runTrace();  // refresh: recalled rows now show RECALLED
        confirmation.ok(`${result.validity} · recalled ${checked.join(", ")}`);
      })
      .catch((err) => confirmation.fail(describe(err)));
  };

  view.append(labeled("Origin (farm or batch)", origin), traceButton, banner,
              reportBox, submit, confirmation.node);
  return view;
}

// ---------------------------------------------------------------------------
// Scan view
// ---------------------------------------------------------------------------

export function renderTraceTree(trace: TraceBack): HTMLElement {
  // indented list: the scanned batch at the root, inputs nested beneath
  const parents = new Map<string, string[]>();
  for (const edge of trace.tree) {
    const list = parents.get(edge.to) ?? [];
    list.push(edge.from);
    parents.set(edge.to, list);
  }
  const events = trace.animal_events;

  const item = (batchId: string, seen: Set<string>): HTMLLIElement => {
    const li = el("li", {}, [el("span", {class: "node", text: batchId})]);
    const history = events[batchId];
    if (history) {
      const animals = el("ul", {class: "animals"});
      for (const [animalId, animalEvents] of Object.entries(history)) {
        const line = animalEvents
          .map((event) => `${event.kind}${event.detail ? ` (${event.detail})` : ""} ${event.at}`)
          .join("; ");
        animals.append(el("li", {text: `${animalId}: ${line}`}));
      }
      li.append(animals);
    }
    const inputs = parents.get(batchId) ?? [];
    if (inputs.length > 0 && !seen.has(batchId)) {
      seen.add(batchId);
      const children = el("ul");
      for (const input of inputs.slice().sort()) {
        children.append(item(input, seen));
      }
      li.append(children);
    }
    return li;
  };

  const root = el("div", {class: "trace"});
  root.append(el("p", {
    class: "origins",
    text: `origin farms: ${trace.origin_farms.join(", ")}`,
  }));
  root.append(el("ul", {class: "trace-tree"}, [item(trace.batch_id, new Set())]));
  return root;
}

export function scanView(gateway: Gateway): HTMLElement {
  const view = el("section", {id: "scan-view", class: "view"});
  view.append(el("h2", {text: "Scan"}),
              el("p", {text: "Paste the QR payload from the packaging."}));
  const input = textInput("payload", "PLV1:...");
  input.id = "scan-input";
  const button = el("button", {id: "scan-btn", type: "button", text: "Verify"});
  const result = new ResultLine();
  result.node.id = "scan-status";
  const output = el("div", {id: "scan-result"});

  button.onclick = () => {
    result.clear();
    output.textContent = "";
    gateway.verifyQr(input.value.trim())
      .then((verified) => {
        result.ok(`authentic · batch ${verified.batch_id}`);
        output.append(renderTraceTree(verified.trace));
      })
      .catch((err) => result.fail(describe(err)));
  };

  view.append(labeled("Payload", input), button, result.node, output);
  return view;
}

// ---------------------------------------------------------------------------
// Shell
// ---------------------------------------------------------------------------

const VIEWS = ["farm", "processor", "recall", "scan"] as const;

export function mountApp(root: HTMLElement, gateway: Gateway,
                         who: WhoAmI | null): void {
  root.textContent = "";
  const header = el("header", {}, [
    el("h1", {text: "ProvLedger console"}),
    el("p", {
      id: "session-line",
      text: who ? `${who.display_name} · ${who.role}` : "scan-only session",
    }),
  ]);
  const nav = el("nav");
  const container = el("main");
  const sections: Record<string, HTMLElement> = {
    farm: farmView(gateway, who),
    processor: processorView(gateway),
    recall: recallView(gateway),
    scan: scanView(gateway),
  };
  const show = (name: string) => {
    for (const view of VIEWS) {
      sections[view].classList.toggle("active", view === name);
      nav.querySelector(`[data-view="${view}"]`)
        ?.classList.toggle("current", view === name);
    }
  };
  for (const view of VIEWS) {
    const button = el("button", {"data-view": view, type: "button",
                                 text: view[0].toUpperCase() + view.slice(1)});
    button.onclick = () => show(view);
    nav.append(button);
  }
  for (const view of VIEWS) container.append(sections[view]);
  root.append(header, nav, container);
  show(who ? "farm" : "scan");
}
