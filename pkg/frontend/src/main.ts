// Demo wiring: render the mock pages, stream the mouse as gaze, and apply
// the gateway's feedback.  All selection authority stays server-side.

import { HistoryStack } from "./history.js";
import { buildPayload, collectRects } from "./layout.js";
import { getPageSet, MockPage, pageById, pageLinks, validatePageSet } from "./pages.js";
import { decodeServer, encode, gaze, hello, pageLayout } from "./protocol.js";
import { GazeSampler } from "./sampler.js";
import { applyServer, Effect, initialState, UiState } from "./state.js";

const params = new URLSearchParams(location.search);
const serverUrl = params.get("server")
  ?? `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/session`;
let overlayOn = params.get("overlay") === "1";

const pages = getPageSet(params.get("pageset"));
const problems = validatePageSet(pages);
if (problems.length) console.error("page set problems:", problems);

const history = new HistoryStack(pages[0].id);
let ui: UiState = initialState();
let pendingNav: ReturnType<typeof setTimeout> | null = null;

const article = document.getElementById("article") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;
const overlay = document.getElementById("overlay") as HTMLElement;

function currentPage(): MockPage {
  return pageById(pages, history.current) ?? pages[0];
}

function renderPage(): void {
  const page = currentPage();
  article.innerHTML = "";
  const h1 = document.createElement("h1");
  h1.textContent = page.title;
  article.appendChild(h1);
  let linkId = 0;
  for (const para of page.paragraphs) {
    const p = document.createElement("p");
    for (const seg of para) {
      if (typeof seg === "string") {
        p.appendChild(document.createTextNode(seg));
      } else {
        linkId += 1;
        const a = document.createElement("span");
        a.className = "link";
        a.dataset.linkId = String(linkId);
        a.textContent = seg.text;
        p.appendChild(a);
      }
    }
    article.appendChild(p);
  }
  overlay.classList.toggle("hidden", !overlayOn);
  sendLayout();
}

// -- gateway connection -------------------------------------------------------

const ws = new WebSocket(serverUrl);
const sampler = new GazeSampler((t, x, y) => {
  if (ws.readyState === WebSocket.OPEN) ws.send(encode(gaze(t, x, y)));
});
sampler.attach(window);

function sendLayout(): void {
  if (ws.readyState !== WebSocket.OPEN) return;
  const { links, buttons } = collectRects(document);
  ws.send(encode(pageLayout(buildPayload(window.innerWidth, window.innerHeight,
                                         links, buttons))));
}

renderPage();  // readable immediately; layout goes out once the socket opens

ws.addEventListener("open", () => {
  ui = { ...ui, connected: true };
  banner.classList.add("hidden");
  ws.send(encode(hello()));
  sendLayout();
  sampler.start();
});

ws.addEventListener("close", () => {
  ui = { ...ui, connected: false };
  sampler.stop();
  banner.textContent = "disconnected from the gaze gateway";
  banner.classList.remove("hidden");
});

ws.addEventListener("message", (ev) => {
  const msg = decodeServer(String(ev.data));
  if (msg === null) {
    console.warn("ignoring unknown frame", ev.data);
    return;
  }
  const step = applyServer(ui, msg, history.current);
  ui = step.state;
  for (const effect of step.effects) runEffect(effect);
});

// -- effects --------------------------------------------------------------------

function runEffect(effect: Effect): void {
  switch (effect.kind) {
    case "flash-button": {
      const el = document.querySelector(`[data-command="${effect.name}"]`);
      if (el) {
        el.classList.add("active");
        setTimeout(() => el.classList.remove("active"), 700);
      }
      break;
    }
    case "show-dwells":
      if (overlayOn) {
        overlay.innerHTML = "<b>dwells</b><br>" + effect.links
          .map((l) => `#${l.id}: ${l.t_ms.toFixed(0)} ms (${l.n} samples)`
            + (l.p !== undefined ? ` p=${l.p.toFixed(3)}` : ""))
          .join("<br>");
      }
      break;
    case "highlight-link": {
      document.querySelectorAll(".link.selected").forEach((el) => el.classList.remove("selected"));
      const el = document.querySelector(`[data-link-id="${effect.id}"]`);
      el?.classList.add("selected");
      break;
    }
    case "navigate-link": {
      const target = pageLinks(currentPage())[effect.id - 1]?.to;
      if (!target) break;
      if (pendingNav !== null) clearTimeout(pendingNav);
      pendingNav = setTimeout(() => {
        pendingNav = null;
        history.visit(target);
        renderPage();
      }, 700);
      break;
    }
    case "navigate-back":
      if (history.back() !== null) renderPage();
      break;
    case "navigate-forward":
      if (history.forward() !== null) renderPage();
      break;
    case "undo-navigation":
      if (pendingNav !== null) {
        clearTimeout(pendingNav);
        pendingNav = null;
        document.querySelectorAll(".link.selected").forEach((el) => el.classList.remove("selected"));
      } else if (history.undoVisit() !== null) {
        renderPage();
      }
      break;
    case "show-error":
      banner.textContent = `gateway error ${effect.code}: ${effect.msg}`;
      banner.classList.remove("hidden");
      break;
  }
}

// -- misc -----------------------------------------------------------------------

window.addEventListener("resize", sendLayout);
window.addEventListener("keydown", (ev) => {
  if (ev.key === "o") {
    overlayOn = !overlayOn;
    overlay.classList.toggle("hidden", !overlayOn);
  }
});
