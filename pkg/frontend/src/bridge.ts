/** Browser bridge: relays the host's TCP telemetry as Server-Sent Events and
 * forwards commands posted by the page, while serving the static app.
 *
 *   node dist/bridge.js [--host-port 9900] [--http-port 8080] [--host 127.0.0.1]
 */

import fs from "node:fs";
import http from "node:http";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { TelemetryClient } from "./client.js";
import { SessionStore } from "./store.js";
import type { ClientMessage } from "./protocol.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const publicDir = path.resolve(here, "..", "public");
const distDir = path.resolve(here);

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 && process.argv[i + 1] ? process.argv[i + 1] : fallback;
}

const hostAddr = arg("host", "127.0.0.1");
const hostPort = Number(arg("host-port", "9900"));
const httpPort = Number(arg("http-port", "8080"));

const store = new SessionStore();
const client = new TelemetryClient(store, {
  host: hostAddr, port: hostPort, reconnect: true,
});

type SseClient = http.ServerResponse;
const sseClients = new Set<SseClient>();
const recent: string[] = [];

// Tap the raw socket stream by re-broadcasting everything the store applies.
const origApply = store.apply.bind(store);
store.apply = (msg) => {
  origApply(msg);
  const line = `data: ${JSON.stringify(msg)}\n\n`;
  recent.push(line);
  if (recent.length > 200) recent.shift();
  for (const res of sseClients) res.write(line);
};

const MIME: Record<string, string> = {
  ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
  ".map": "application/json",
};

const server = http.createServer((req, res) => {
  const url = (req.url ?? "/").split("?")[0];
  if (url === "/events") {
    res.writeHead(200, {
      "Content-Type": "text/event-stream",
      "Cache-Control": "no-cache",
      Connection: "keep-alive",
    });
    for (const line of recent) res.write(line);
    sseClients.add(res);
    req.on("close", () => sseClients.delete(res));
    return;
  }
  if (url === "/command" && req.method === "POST") {
    let body = "";
    req.on("data", (c) => (body += c));
    req.on("end", () => {
      try {
        const msg = JSON.parse(body) as ClientMessage;
        client.send(msg);
        res.writeHead(202).end();
      } catch {
        res.writeHead(400).end("bad command JSON");
      }
    });
    return;
  }
  // static files: public/ first, then compiled dist/
  const rel = url === "/" ? "/index.html" : url;
  for (const base of [publicDir, distDir]) {
    const file = path.join(base, rel);
    if (file.startsWith(base) && fs.existsSync(file) && fs.statSync(file).isFile()) {
      res.writeHead(200, { "Content-Type": MIME[path.extname(file)] ?? "text/plain" });
      fs.createReadStream(file).pipe(res);
      return;
    }
  }
  res.writeHead(404).end("not found");
});

server.listen(httpPort, () => {
  console.log(`dashboard: http://127.0.0.1:${httpPort} (host ${hostAddr}:${hostPort})`);
});
client.connect().catch(() => {
  console.log("host not reachable yet; retrying in the background");
});
