import { ApiClient } from "./api";
import { renderApp } from "./dom";
import { SessionStore } from "./store";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const store = new SessionStore(new ApiClient());
renderApp(root, store);

const params = new URLSearchParams(window.location.search);
void store.createSession(params.get("dataset") ?? "wbc");
