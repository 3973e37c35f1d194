// Gateway client. Every view talks to the ledger exclusively through this
// module; nothing here computes domain facts, it only moves JSON.

export interface TxResult {
  tx_id: string;
  validity: string;
}

export interface TraceEdge {
  from: string;
  to: string;
  step_id: string;
}

export interface AnimalEvent {
  kind: string;
  detail: string;
  at: string;
}

export interface TraceBack {
  batch_id: string;
  origin_farms: string[];
  tree: TraceEdge[];
  animal_events: Record<string, Record<string, AnimalEvent[]>>;
}

export interface RecallReport {
  origin: string;
  affected_batches: string[];
  holders: Record<string, string>;
  generated_at_height: number;
}

export interface RecallResult extends TxResult {
  report: RecallReport;
}

export interface BatchDoc {
  batch_id: string;
  kind: string;
  owner: string;
  origin_farms: string[];
  recalled: boolean;
  rfid: string;
  custody: [string, number][];
}

export interface TokenEntry {
  farm_id: string;
  balance: number;
  tokens: string[];
}

export interface QrResult {
  batch_id: string;
  trace: TraceBack;
}

export interface WhoAmI {
  id: string;
  display_name: string;
  role: string;
}

export interface ProcessResult extends TxResult {
  result: {
    output_id: string;
    origin_farms: string[];
    transfer_records: {
      source: string;
      receiver: string;
      token: string;
      product_id: string;
    }[];
  };
}

/** A refusal or failure reported by the gateway, with its typed code. */
export class GatewayError extends Error {
  constructor(readonly code: string, readonly detail: string,
              readonly status: number) {
    super(detail ? `${code}: ${detail}` : code);
  }
}

export class Gateway {
  constructor(readonly baseUrl: string, readonly token: string | null) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = {"Content-Type": "application/json"};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async unwrap<T>(response: Response): Promise<T> {
    const text = await response.text();
    let body: any = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!response.ok) {
      const source = body && typeof body === "object"
        ? (typeof body.detail === "object" && body.detail !== null ? body.detail : body)
        : {};
      const code = source.error ?? `HTTP_${response.status}`;
      const detail = typeof source.detail === "string" ? source.detail : "";
      throw new GatewayError(code, detail, response.status);
    }
    return body as T;
  }

  async get<T>(path: string): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return this.unwrap<T>(await fetch(this.baseUrl + path, {headers}));
  }

  async post<T>(path: string, body: unknown): Promise<T> {
    return this.unwrap<T>(await fetch(this.baseUrl + path, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    }));
  }

  whoami(): Promise<WhoAmI> {
    return this.get("/whoami");
  }

  registerAnimal(animalId: string, bornAt: string): Promise<TxResult> {
    return this.post("/animals", {animal_id: animalId, born_at: bornAt});
  }

  recordAnimalEvent(animalId: string, kind: string, detail: string,
                    at: string): Promise<TxResult> {
    return this.post(`/animals/${encodeURIComponent(animalId)}/events`,
                     {kind, detail, at});
  }

  registerBatch(batchId: string, sourceAnimals: string[],
                rfid: string): Promise<TxResult> {
    return this.post("/batches",
                     {batch_id: batchId, source_animals: sourceAnimals, rfid});
  }

  processBatch(inputs: string[], outputId: string,
               processKind: string): Promise<ProcessResult> {
    return this.post("/process",
                     {inputs, output_id: outputId, process_kind: processKind});
  }

  transferCustody(batchId: string, to: string): Promise<TxResult> {
    return this.post("/transfers", {batch_id: batchId, to});
  }

  publishOffer(productId: string, standardPrice: number,
               targeted: [string, number][], settlement: string): Promise<any> {
    return this.post("/offers", {
      product_id: productId,
      standard_price: standardPrice,
      targeted,
      settlement,
    });
  }

  acceptOffer(offerId: string): Promise<TxResult & {price: number}> {
    return this.post(`/offers/${encodeURIComponent(offerId)}/accept`, {});
  }

  traceForward(origin: string): Promise<RecallReport> {
    return this.get(`/trace/forward/${encodeURIComponent(origin)}`);
  }

  traceBack(batchId: string): Promise<TraceBack> {
    return this.get(`/trace/back/${encodeURIComponent(batchId)}`);
  }

  recall(origin: string, batchIds: string[]): Promise<RecallResult> {
    return this.post("/recalls", {origin, batch_ids: batchIds});
  }

  batch(batchId: string): Promise<BatchDoc> {
    return this.get(`/batches/${encodeURIComponent(batchId)}`);
  }

  tokens(farmId: string): Promise<TokenEntry> {
    return this.get(`/tokens/${encodeURIComponent(farmId)}`);
  }

  verifyQr(payload: string): Promise<QrResult> {
    return this.get(`/qr/${payload}`);
  }
}
