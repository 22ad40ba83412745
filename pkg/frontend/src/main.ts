import { mountConsole } from "./app";

const params = new URLSearchParams(window.location.search);
const baseUrl =
  params.get("service") ?? window.localStorage.getItem("serviceUrl") ?? "";

const root = document.querySelector<HTMLElement>("#app");
if (root) {
  mountConsole(baseUrl, root);
}
