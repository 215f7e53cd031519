import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // same-origin service by default; override with ?api=http://host:port
  const apiBase = new URLSearchParams(location.search).get("api") ?? "";
  new App(root, new ApiClient(apiBase));
}
