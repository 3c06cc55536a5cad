import { ApiClient } from "./api.js";
import { DashboardApp } from "./app.js";

declare global {
  interface Window {
    HEATDISPATCH_BASE_URL?: string;
  }
}

const baseUrl = window.HEATDISPATCH_BASE_URL ?? "http://127.0.0.1:8008";
const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}
const app = new DashboardApp(root, new ApiClient(baseUrl));
app.start();
