/** Small DOM helpers: hyperscript, sortable tables, downloads, tooltip. */

export function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number | boolean | EventListener> = {},
  ...children: (Node | string | null | undefined)[]
): HTMLElementTagNameMap[K] {
  const el = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (typeof v === "function") {
      el.addEventListener(k.replace(/^on/, ""), v as EventListener);
    } else if (typeof v === "boolean") {
      if (v) el.setAttribute(k, "");
    } else {
      el.setAttribute(k, String(v));
    }
  }
  for (const child of children) {
    if (child !== null && child !== undefined) el.append(child);
  }
  return el;
}

export function clear(el: HTMLElement): HTMLElement {
  el.textContent = "";
  return el;
}

/**
 * Sortable table. Cell strings are displayed as given (payload-verbatim);
 * sorting compares the underlying values numerically when both parse.
 */
export function sortableTable(header: string[], rows: string[][]): HTMLTableElement {
  const table = h("table", { class: "data-table" });
  const thead = h("thead");
  const tbody = h("tbody");
  let sortCol = -1;
  let ascending = true;

  const render = (ordered: string[][]) => {
    tbody.textContent = "";
    for (const row of ordered) {
      tbody.append(h("tr", {}, ...row.map((cell) => h("td", { title: cell }, cell))));
    }
  };

  const headRow = h("tr");
  header.forEach((name, idx) => {
    headRow.append(
      h("th", {},
        h("button", {
          class: "sort-btn",
          type: "button",
          "aria-label": `sort by ${name}`,
          onclick: () => {
            ascending = sortCol === idx ? !ascending : true;
            sortCol = idx;
            const ordered = [...rows].sort((a, b) => {
              const av = a[idx] ?? "";
              const bv = b[idx] ?? "";
              const an = Number(av);
              const bn = Number(bv);
              const cmp =
                Number.isFinite(an) && Number.isFinite(bn)
                  ? an - bn
                  : av.localeCompare(bv);
              return ascending ? cmp : -cmp;
            });
            render(ordered);
          },
        }, name),
      ),
    );
  });
  thead.append(headRow);
  render(rows);
  table.append(thead, tbody);
  return table;
}

export function downloadBlob(blob: Blob, filename: string): void {
  const url = URL.createObjectURL(blob);
  const a = h("a", { href: url, download: filename });
  document.body.append(a);
  a.click();
  a.remove();
  URL.revokeObjectURL(url);
}

export function downloadText(text: string, filename: string, mime = "image/svg+xml"): void {
  downloadBlob(new Blob([text], { type: mime }), filename);
}

/** One floating tooltip fed by data-tip attributes anywhere in root. */
export function installTooltip(root: HTMLElement): void {
  const tip = h("div", { class: "tooltip", role: "status", "aria-live": "polite" });
  tip.style.display = "none";
  root.append(tip);
  const show = (target: Element, ev?: MouseEvent) => {
    const text = target.getAttribute("data-tip");
    if (!text) return;
    tip.textContent = text;
    tip.style.display = "block";
    const px = ev?.clientX ?? target.getBoundingClientRect().x;
    const py = ev?.clientY ?? target.getBoundingClientRect().y;
    tip.style.left = `${px + 12}px`;
    tip.style.top = `${py + 12}px`;
  };
  root.addEventListener("mousemove", (ev) => {
    const target = (ev.target as Element).closest("[data-tip]");
    if (target) show(target, ev as MouseEvent);
    else tip.style.display = "none";
  });
  root.addEventListener("focusin", (ev) => {
    const target = (ev.target as Element).closest("[data-tip]");
    if (target) show(target);
  });
  root.addEventListener("focusout", () => {
    tip.style.display = "none";
  });
}

export function statusBadge(text: string, kind: "info" | "warn" | "error" = "info"): HTMLElement {
  return h("span", { class: `badge badge-${kind}` }, text);
}
