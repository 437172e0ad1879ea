// Portal screen: how many blockchains, and whether a hub mediates them.

export interface PortalChoice {
  chains: number;
  hub: boolean;
}

export class PortalView {
  constructor(
    private readonly el: HTMLElement,
    private readonly onNext: (choice: PortalChoice) => void,
  ) {}

  render(): void {
    this.el.innerHTML = `
      <h1>Cross-chain transaction console</h1>
      <form id="portal-form">
        <label>Number of blockchains
          <input name="chains" type="number" min="2" max="64" value="3">
        </label>
        <label><input name="hub" type="checkbox"> Route through a hub</label>
        <button type="submit">Continue</button>
      </form>`;
    const form = this.el.querySelector("#portal-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      this.onNext({
        chains: Number(data.get("chains") ?? 3),
        hub: data.get("hub") === "on",
      });
    });
  }
}
