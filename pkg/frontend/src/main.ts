// Boot: a login screen that takes the gateway URL and a bearer token, then
// the four operator views. The session is held in localStorage only as a
// convenience; nothing client-side is authoritative.

import {Gateway} from "./api.js";
import {el, labeled, textInput} from "./dom.js";
import {mountApp} from "./views.js";

const SESSION_KEY = "provledger-console-session";

interface Session {
  baseUrl: string;
  token: string | null;
}

function mountLogin(root: HTMLElement): void {
  root.textContent = "";
  const saved = loadSession();
  const urlInput = textInput("gateway_url", "http://127.0.0.1:8420",
                             saved?.baseUrl ?? "http://127.0.0.1:8420");
  const tokenInput = textInput("token", "bearer token", saved?.token ?? "");
  const status = el("output", {class: "result"});

  const form = el("form", {id: "login-form"}, [
    el("h1", {text: "ProvLedger console"}),
    labeled("Gateway URL", urlInput),
    labeled("Bearer token (empty for scan-only)", tokenInput),
    el("button", {type: "submit", text: "Connect"}),
    status,
  ]);

  form.onsubmit = (event) => {
    event.preventDefault();
    status.textContent = "connecting…";
    const session: Session = {
      baseUrl: urlInput.value.trim().replace(/\/+$/, ""),
      token: tokenInput.value.trim() || null,
    };
    connect(root, session)
      .catch((err) => {
        status.className = "result err";
        status.textContent = `connection failed: ${err.message ?? err}`;
      });
  };

  root.append(form);
}

async function connect(root: HTMLElement, session: Session): Promise<void> {
  const gateway = new Gateway(session.baseUrl, session.token);
  await gateway.get("/health");
  const who = session.token ? await gateway.whoami() : null;
  saveSession(session);
  mountApp(root, gateway, who);
  const logout = el("button", {id: "logout", type: "button", text: "Log out"});
  logout.onclick = () => {
    localStorage.removeItem(SESSION_KEY);
    mountLogin(root);
  };
  root.querySelector("header")?.append(logout);
}

function loadSession(): Session | null {
  try {
    const raw = localStorage.getItem(SESSION_KEY);
    return raw ? JSON.parse(raw) as Session : null;
  } catch {
    return null;
  }
}

function saveSession(session: Session): void {
  try {
    localStorage.setItem(SESSION_KEY, JSON.stringify(session));
  } catch {
    // private browsing etc.; the session just will not persist
  }
}

const appRoot = document.querySelector<HTMLElement>("#app");
if (appRoot) mountLogin(appRoot);
